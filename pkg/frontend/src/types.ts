// Wire types mirroring the annotation server's payloads. The client never
// fabricates fields: everything rendered comes from these responses.

export const GRADES = ["2", "5", "8", "11"] as const;
export type Grade = (typeof GRADES)[number];

export interface GradeOutputs {
  left: string;
  right: string;
}

export interface ClientTaskView {
  task_id: string;
  input: string;
  mode: "preference" | "strategy";
  outputs: Record<Grade, GradeOutputs>;
  strategies: Record<Grade, string[]> | null;
}

export interface SessionInfo {
  session: string;
  queue: string[];
  total: number;
}

export type Choice = "left" | "right" | "tie";

export interface PreferenceChoice {
  choice: Choice;
  reason: string;
}

export interface PreferenceSubmission {
  task_id: string;
  choices: Record<Grade, PreferenceChoice>;
}

export interface StrategySubmission {
  task_id: string;
  selections: Record<Grade, string[]>;
}

export interface Credentials {
  annotatorId: string;
  token: string;
}
