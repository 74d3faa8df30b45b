// Thin typed client over the grading service. Every mutation carries the
// version the caller last saw; a 409 from the server becomes StaleVersionError
// so screens can prompt for a reload instead of silently diverging.

import type {
  Assignment,
  DisagreementsPayload,
  EvaluationItem,
  ItemsPayload,
  ReportsPayload,
  ResponseRow,
  RunDetail,
  RunSummary,
  ShotConfig,
} from "./types.js";

export class ApiError extends Error {
  constructor(public readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export class StaleVersionError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "StaleVersionError";
  }
}

async function parseError(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      const detail = await parseError(response);
      if (response.status === 409) throw new StaleVersionError(detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  listAssignments(): Promise<Assignment[]> {
    return this.request("/assignments");
  }

  getItems(assignmentId: string): Promise<ItemsPayload> {
    return this.request(`/assignments/${encodeURIComponent(assignmentId)}/items`);
  }

  getResponses(assignmentId: string): Promise<{ responses: ResponseRow[] }> {
    return this.request(`/assignments/${encodeURIComponent(assignmentId)}/responses`);
  }

  approveItem(
    itemRef: string,
    body: { chosen_text: string; instruction?: string | null; version: number; revise?: boolean },
  ): Promise<EvaluationItem> {
    return this.request(`/items/${encodeURIComponent(itemRef)}/approve`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  launchRun(body: {
    assignment_id: string;
    backend: string;
    shot_set?: string;
    shot_config?: ShotConfig;
  }): Promise<{ run_id: string; status: string }> {
    return this.request("/runs", { method: "POST", body: JSON.stringify(body) });
  }

  listRuns(): Promise<RunSummary[]> {
    return this.request("/runs");
  }

  getRun(runId: string): Promise<RunDetail> {
    return this.request(`/runs/${encodeURIComponent(runId)}`);
  }

  getReports(runId: string): Promise<ReportsPayload> {
    return this.request(`/runs/${encodeURIComponent(runId)}/reports`);
  }

  flagRelevance(
    cellId: string,
    body: { flag: "relevant" | "irrelevant"; annotator_id: string; version: number },
  ): Promise<{ version: number }> {
    return this.request(`/cells/${encodeURIComponent(cellId)}/relevance`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  getDisagreements(): Promise<DisagreementsPayload> {
    return this.request("/labels/disagreements");
  }

  resolveDisagreement(
    key: string,
    body: { label: 0 | 1; version: number; resolver_id?: string },
  ): Promise<{ version: number; complete: boolean }> {
    return this.request(`/disagreements/${encodeURIComponent(key)}/resolve`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }
}
