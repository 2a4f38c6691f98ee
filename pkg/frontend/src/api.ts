/** Thin typed client for the workbench HTTP API. */

import type {
  NextTaskResponse,
  Progress,
  SubmitOk,
  TaskPayload,
  ValidationResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`api error ${status}`);
    this.name = "ApiError";
  }
}

async function parseDetail(response: Response): Promise<unknown> {
  try {
    const body: unknown = await response.json();
    if (body !== null && typeof body === "object" && "detail" in body) {
      return (body as { detail: unknown }).detail;
    }
    return body;
  } catch {
    return null;
  }
}

/** Pull the per-turn verdict out of a submit rejection, if it carries one. */
export function rejectionVerdict(err: unknown): ValidationResponse | null {
  if (err instanceof ApiError && err.status === 422) {
    const d = err.detail;
    if (d !== null && typeof d === "object" && "results" in d) {
      return d as ValidationResponse;
    }
  }
  return null;
}

export class WorkbenchClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.base + path, init);
    if (!response.ok) {
      throw new ApiError(response.status, await parseDetail(response));
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  nextTask(): Promise<NextTaskResponse> {
    return this.request("/api/tasks/next");
  }

  getTask(taskId: string): Promise<TaskPayload> {
    return this.request(`/api/tasks/${encodeURIComponent(taskId)}`);
  }

  validate(taskId: string, turns: string[]): Promise<ValidationResponse> {
    return this.post(`/api/tasks/${encodeURIComponent(taskId)}/validate`, {
      turns,
    });
  }

  submit(taskId: string, turns: string[]): Promise<SubmitOk> {
    return this.post(`/api/tasks/${encodeURIComponent(taskId)}/submit`, {
      turns,
    });
  }

  progress(): Promise<Progress> {
    return this.request("/api/progress");
  }
}
