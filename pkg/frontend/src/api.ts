/** Thin typed client over the annotation HTTP API. */

import type { AgreementResponse, JudgmentRequest, TaskView, TasksResponse } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

async function readError(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async fetchTasks(annotator: string): Promise<TaskView[]> {
    const url = `${this.baseUrl}/api/tasks?annotator=${encodeURIComponent(annotator)}`;
    const response = await fetch(url);
    if (!response.ok) throw new ApiError(await readError(response), response.status);
    const body = (await response.json()) as TasksResponse;
    return body.tasks;
  }

  async submitJudgment(request: JudgmentRequest): Promise<void> {
    const response = await fetch(`${this.baseUrl}/api/judgments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!response.ok) throw new ApiError(await readError(response), response.status);
  }

  async fetchAgreement(): Promise<AgreementResponse> {
    const response = await fetch(`${this.baseUrl}/api/agreement`);
    if (!response.ok) throw new ApiError(await readError(response), response.status);
    return (await response.json()) as AgreementResponse;
  }
}
