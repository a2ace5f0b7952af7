// Thin typed client for the annotation service endpoints.

import type {
  ClientTaskView,
  Credentials,
  PreferenceSubmission,
  SessionInfo,
  StrategySubmission,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnoClient {
  private session = "";

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers: Record<string, string> = {
      "Content-Type": "application/json",
      ...(this.session ? { "X-Session": this.session } : {}),
    };
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, { ...init, headers });
    } catch (err) {
      throw new ApiError(0, err instanceof Error ? err.message : "network failure");
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  async createSession(credentials: Credentials): Promise<SessionInfo> {
    const info = await this.request<SessionInfo>("/session", {
      method: "POST",
      body: JSON.stringify({
        annotator_id: credentials.annotatorId,
        token: credentials.token,
      }),
    });
    this.session = info.session;
    return info;
  }

  getTask(taskId: string): Promise<ClientTaskView> {
    return this.request<ClientTaskView>(`/task/${encodeURIComponent(taskId)}`);
  }

  submitPreference(submission: PreferenceSubmission): Promise<{ status: string }> {
    return this.request("/preference", {
      method: "POST",
      body: JSON.stringify(submission),
    });
  }

  submitStrategies(submission: StrategySubmission): Promise<{ status: string }> {
    return this.request("/strategy", {
      method: "POST",
      body: JSON.stringify(submission),
    });
  }
}
