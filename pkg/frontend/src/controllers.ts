// Screen controllers: all UI state lives here, derived solely from API
// responses. The DOM layer subscribes and re-renders; tests drive these
// directly against a live service. No grading logic exists on the client.

import { ApiClient, ApiError, StaleVersionError } from "./client.js";
import type {
  Assignment,
  DisagreementsPayload,
  EvaluationItem,
  ReportsPayload,
  ResponseRow,
  RunDetail,
  ScoreReport,
} from "./types.js";

type Listener = () => void;

class Observable {
  private listeners: Listener[] = [];

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  protected notify(): void {
    for (const listener of this.listeners) listener();
  }
}

/** Shared error banner semantics: network failures set `error` (retry
 * banner); 409s set `staleVersion` (reload prompt). */
export interface ScreenErrors {
  error: string | null;
  staleVersion: string | null;
}

function emptyErrors(): ScreenErrors {
  return { error: null, staleVersion: null };
}

// ---------------------------------------------------------------------------
// Item review
// ---------------------------------------------------------------------------

export class ReviewController extends Observable {
  assignment: Assignment | null = null;
  items: EvaluationItem[] = [];
  errors: ScreenErrors = emptyErrors();

  constructor(private readonly api: ApiClient, readonly assignmentId: string) {
    super();
  }

  get allApproved(): boolean {
    return this.items.length > 0 && this.items.every((i) => i.status === "approved");
  }

  async load(): Promise<void> {
    try {
      const assignments = await this.api.listAssignments();
      this.assignment = assignments.find((a) => a.id === this.assignmentId) ?? null;
      this.items = (await this.api.getItems(this.assignmentId)).items;
      this.errors = emptyErrors();
    } catch (error) {
      this.errors.error = String(error);
    }
    this.notify();
  }

  /** Approve one candidate (or edited text); stale versions surface a
   * reload prompt and leave the item untouched. */
  async approve(
    itemId: string,
    chosenText: string,
    instruction?: string | null,
    revise = false,
  ): Promise<boolean> {
    const item = this.items.find((i) => i.item_id === itemId);
    if (!item) return false;
    try {
      const updated = await this.api.approveItem(item.item_ref, {
        chosen_text: chosenText,
        instruction: instruction ?? undefined,
        version: item.version,
        revise,
      });
      this.items = this.items.map((i) => (i.item_id === itemId ? { ...i, ...updated } : i));
      this.errors = emptyErrors();
      this.notify();
      return true;
    } catch (error) {
      if (error instanceof StaleVersionError) {
        this.errors.staleVersion = `Item ${itemId} changed elsewhere; reload to pick up the latest version.`;
      } else {
        this.errors.error = String(error);
      }
      this.notify();
      return false;
    }
  }

  /** Reload after a stale-version prompt. */
  async reload(): Promise<void> {
    await this.load();
  }
}

// ---------------------------------------------------------------------------
// Run dashboard
// ---------------------------------------------------------------------------

export class RunController extends Observable {
  run: RunDetail | null = null;
  reports: ReportsPayload | null = null;
  errors: ScreenErrors = emptyErrors();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly assignmentId: string,
    private readonly pollMs = 500,
  ) {
    super();
  }

  get progressLabel(): string {
    if (!this.run) return "no run";
    const { resolved, total } = this.run.progress;
    return `${resolved}/${total} cells ${this.run.status}`;
  }

  async launch(backend = "oracle", shots = 0, method: "clustering" | "random" = "random"): Promise<string | null> {
    try {
      const launched = await this.api.launchRun({
        assignment_id: this.assignmentId,
        backend,
        shot_config: { method, k: shots, seed: 0 },
      });
      this.errors = emptyErrors();
      await this.refresh(launched.run_id);
      return launched.run_id;
    } catch (error) {
      this.errors.error = String(error);
      this.notify();
      return null;
    }
  }

  async refresh(runId: string): Promise<RunDetail | null> {
    try {
      this.run = await this.api.getRun(runId);
      this.errors = emptyErrors();
      if (this.run.status === "complete" && !this.reports) {
        this.reports = await this.api.getReports(runId);
      }
    } catch (error) {
      this.errors.error = String(error);
    }
    this.notify();
    return this.run;
  }

  /** Poll until the run settles; resolves with the final state. */
  async watch(runId: string): Promise<RunDetail> {
    this.stopPolling();
    return new Promise((resolve) => {
      this.timer = setInterval(async () => {
        const run = await this.refresh(runId);
        if (run && (run.status === "complete" || run.status === "failed")) {
          this.stopPolling();
          resolve(run);
        }
      }, this.pollMs);
    });
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

// ---------------------------------------------------------------------------
// Response detail (per-item grades, justifications, relevance toggles)
// ---------------------------------------------------------------------------

export class ResponseDetailController extends Observable {
  responses: ResponseRow[] = [];
  selected: string | null = null;
  report: ScoreReport | null = null;
  errors: ScreenErrors = emptyErrors();

  constructor(
    private readonly api: ApiClient,
    readonly assignmentId: string,
    readonly runId: string,
  ) {
    super();
  }

  async load(): Promise<void> {
    try {
      this.responses = (await this.api.getResponses(this.assignmentId)).responses;
      this.errors = emptyErrors();
    } catch (error) {
      this.errors.error = String(error);
    }
    this.notify();
  }

  async select(responseId: string): Promise<ScoreReport | null> {
    try {
      const payload = await this.api.getReports(this.runId);
      this.report = payload.reports.find((r) => r.response_id === responseId) ?? null;
      this.selected = responseId;
      this.errors = emptyErrors();
    } catch (error) {
      this.errors.error = String(error);
    }
    this.notify();
    return this.report;
  }

  /** Flag one justification's relevance; the run document's version guards
   * against concurrent annotation. */
  async flag(itemId: string, flag: "relevant" | "irrelevant", annotator: string): Promise<boolean> {
    if (!this.selected) return false;
    try {
      const run = await this.api.getRun(this.runId);
      await this.api.flagRelevance(`${this.runId}:${this.selected}:${itemId}`, {
        flag,
        annotator_id: annotator,
        version: run.version,
      });
      this.errors = emptyErrors();
      this.notify();
      return true;
    } catch (error) {
      if (error instanceof StaleVersionError) {
        this.errors.staleVersion = "The run changed while annotating; reload and retry.";
      } else {
        this.errors.error = String(error);
      }
      this.notify();
      return false;
    }
  }
}

// ---------------------------------------------------------------------------
// Reconciliation queue
// ---------------------------------------------------------------------------

export class ReconcileController extends Observable {
  queue: DisagreementsPayload = { reconciliation: null, version: null, disagreements: [] };
  errors: ScreenErrors = emptyErrors();

  constructor(private readonly api: ApiClient) {
    super();
  }

  get openCount(): number {
    return this.queue.disagreements.filter((d) => d.resolution === null).length;
  }

  async load(): Promise<void> {
    try {
      this.queue = await this.api.getDisagreements();
      this.errors = emptyErrors();
    } catch (error) {
      this.errors.error = String(error);
    }
    this.notify();
  }

  async resolve(key: string, label: 0 | 1, resolver: string): Promise<boolean> {
    if (this.queue.version === null) return false;
    try {
      await this.api.resolveDisagreement(key, {
        label,
        version: this.queue.version,
        resolver_id: resolver,
      });
      await this.load(); // read-your-write: re-fetch the queue
      return true;
    } catch (error) {
      if (error instanceof StaleVersionError) {
        this.errors.staleVersion = "The queue changed elsewhere; reload before resolving.";
      } else if (error instanceof ApiError && error.status === 404) {
        this.errors.error = `No such disagreement: ${key}`;
      } else {
        this.errors.error = String(error);
      }
      this.notify();
      return false;
    }
  }
}
