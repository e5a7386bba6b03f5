/** Wire types for the annotation API and the UI's session projection. */

/** One pair as served by GET /api/tasks. */
export interface TaskView {
  task_id: string;
  h: string;
  h_prime: string;
  judged: boolean;
}

export interface TasksResponse {
  tasks: TaskView[];
}

/** Body of POST /api/judgments — field names are fixed by the server. */
export interface JudgmentRequest {
  task_id: string;
  annotator: string;
  equivalent: boolean;
}

export interface AgreementResponse {
  percent_agreement: number | null;
  kappa: number | null;
  n: number;
}

/** Pure projection of server state rendered by the UI. */
export interface SessionView {
  annotator: string;
  current: TaskView | null;
  judgedCount: number;
  total: number;
  done: boolean;
}
