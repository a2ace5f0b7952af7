// Single-page annotation flow: session entry -> task loop -> completion.
// The server is the source of truth; the queue is re-fetched on login, so
// a refresh resumes exactly where the committed submissions left off.

import { AnnoClient, ApiError, type FetchLike } from "./api.js";
import {
  clear,
  renderDone,
  renderLogin,
  renderPreferenceScreen,
  renderRetryBanner,
  renderStrategyScreen,
} from "./screens.js";
import type { ClientTaskView, Credentials } from "./types.js";

const CREDENTIALS_KEY = "readctrl.credentials";

export class AnnotatorApp {
  private client: AnnoClient | null = null;
  private queue: string[] = [];
  private total = 0;

  constructor(
    private root: HTMLElement,
    private baseUrl: string,
    private fetchImpl?: FetchLike,
    private storage: Storage | null = typeof sessionStorage === "undefined" ? null : sessionStorage,
  ) {}

  async start(): Promise<void> {
    const saved = this.storage?.getItem(CREDENTIALS_KEY);
    if (saved) {
      try {
        await this.login(JSON.parse(saved) as Credentials);
        return;
      } catch {
        this.storage?.removeItem(CREDENTIALS_KEY);
      }
    }
    this.showLogin();
  }

  private showLogin(errorMessage = ""): void {
    renderLogin(this.root, (annotatorId, token) => {
      void this.login({ annotatorId, token }).catch((err) => {
        this.showLogin(err instanceof ApiError ? err.detail : String(err));
      });
    }, errorMessage);
  }

  async login(credentials: Credentials): Promise<void> {
    const client = new AnnoClient(this.baseUrl, this.fetchImpl);
    const info = await client.createSession(credentials);
    this.client = client;
    this.queue = [...info.queue];
    this.total = info.total;
    this.storage?.setItem(CREDENTIALS_KEY, JSON.stringify(credentials));
    await this.next();
  }

  /** number of tasks completed this session */
  get completed(): number {
    return this.total - this.queue.length;
  }

  async next(): Promise<void> {
    if (!this.client) throw new Error("no session");
    if (this.queue.length === 0) {
      renderDone(this.root, this.completed, this.total);
      return;
    }
    const taskId = this.queue[0];
    let task: ClientTaskView;
    try {
      task = await this.client.getTask(taskId);
    } catch (err) {
      this.showRetry(err, () => void this.next());
      return;
    }
    this.showTask(task);
  }

  private showTask(task: ClientTaskView): void {
    const progress = { done: this.completed, total: this.total };
    if (task.mode === "strategy") {
      const handle = renderStrategyScreen(this.root, task, progress, (submission) => {
        void this.client!.submitStrategies(submission)
          .then(() => this.advance())
          .catch((err) => handle.showError(describe(err)));
      });
    } else {
      const handle = renderPreferenceScreen(this.root, task, progress, (submission) => {
        void this.client!.submitPreference(submission)
          .then(() => this.advance())
          .catch((err) => handle.showError(describe(err)));
      });
    }
  }

  private advance(): void {
    this.queue.shift();
    void this.next();
  }

  private showRetry(err: unknown, onRetry: () => void): void {
    clear(this.root);
    renderRetryBanner(this.root, `Could not reach the server (${describe(err)})`, onRetry);
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.detail || `HTTP ${err.status}`;
  return err instanceof Error ? err.message : String(err);
}

export function mount(root: HTMLElement, baseUrl: string): AnnotatorApp {
  const app = new AnnotatorApp(root, baseUrl);
  void app.start();
  return app;
}

// browser entry point: mount on the #app element when loaded as a script
if (typeof document !== "undefined" && document.getElementById("app")) {
  mount(document.getElementById("app")!, window.location.origin);
}
