// DOM layer: renders the four screens off their controllers and forwards
// user actions to them. Everything shown comes verbatim from controller
// state (textContent assignment, never templated copies of grades).

import { ApiClient } from "./client.js";
import {
  ReconcileController,
  ResponseDetailController,
  ReviewController,
  RunController,
  type ScreenErrors,
} from "./controllers.js";
import type { EvaluationItem } from "./types.js";

const api = new ApiClient("");

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderErrors(target: HTMLElement, errors: ScreenErrors, onReload: () => void): void {
  if (errors.staleVersion) {
    const banner = el("div", "banner banner-stale");
    banner.append(el("span", "", errors.staleVersion));
    const reload = el("button", "", "Reload");
    reload.addEventListener("click", onReload);
    banner.append(reload);
    target.append(banner);
  }
  if (errors.error) {
    const banner = el("div", "banner banner-error");
    banner.append(el("span", "", errors.error));
    const retry = el("button", "", "Retry");
    retry.addEventListener("click", onReload);
    banner.append(retry);
    target.append(banner);
  }
}

// -- item review screen --------------------------------------------------------

function itemCard(review: ReviewController, item: EvaluationItem): HTMLElement {
  const card = el("section", `card item-card status-${item.status}`);
  card.append(el("h3", "", `${item.item_id} — ${item.gold_answer}`));
  card.append(el("p", "muted", `status: ${item.status} (v${item.version})`));

  const instruction = el("textarea", "instruction") as HTMLTextAreaElement;
  instruction.placeholder = "question-specific instruction (optional)";
  instruction.value = item.question_specific_instruction ?? "";

  const list = el("div", "candidates");
  item.candidates.forEach((candidate) => {
    const row = el("div", "candidate");
    const marker = candidate === item.approved_question ? "✓ " : "";
    row.append(el("span", "", marker + candidate));
    const approve = el("button", "", item.status === "approved" ? "Re-approve" : "Approve");
    approve.addEventListener("click", () => {
      void review.approve(
        item.item_id,
        candidate,
        instruction.value || null,
        item.status === "approved",
      );
    });
    row.append(approve);
    list.append(row);
  });
  card.append(list);
  card.append(el("p", "muted", "excerpt: " + item.gold_excerpt));
  card.append(instruction);
  return card;
}

function renderReview(root: HTMLElement, review: ReviewController): void {
  root.replaceChildren();
  renderErrors(root, review.errors, () => void review.reload());
  root.append(el("h2", "", `Question review — ${review.assignmentId}`));
  if (review.assignment) {
    root.append(el("p", "reference", review.assignment.reference_answer));
  }
  for (const item of review.items) root.append(itemCard(review, item));
  root.append(
    el(
      "p",
      review.allApproved ? "ok" : "muted",
      review.allApproved ? "All items approved — runs can launch." : "Approve every item to unlock grading.",
    ),
  );
}

// -- run dashboard ----------------------------------------------------------------

function renderRun(root: HTMLElement, runs: RunController, onComplete: (runId: string) => void): void {
  root.replaceChildren();
  renderErrors(root, runs.errors, () => {
    if (runs.run) void runs.refresh(runs.run.run_id);
  });
  root.append(el("h2", "", "Grading runs"));

  const launch = el("button", "primary", "Launch zero-shot oracle run");
  launch.addEventListener("click", () => {
    void runs.launch().then((runId) => {
      if (runId) void runs.watch(runId).then(() => onComplete(runId));
    });
  });
  root.append(launch);

  if (runs.run) {
    const panel = el("section", "card");
    panel.append(el("h3", "", `Run ${runs.run.run_id}`));
    panel.append(el("p", "", runs.progressLabel));
    const bar = el("div", "progress");
    const fill = el("div", "progress-fill");
    const { resolved, total } = runs.run.progress;
    fill.style.width = total ? `${(100 * resolved) / total}%` : "0%";
    bar.append(fill);
    panel.append(bar);
    if (runs.reports) {
      const histogram = el("div", "histogram");
      for (const [score, count] of Object.entries(runs.reports.histogram)) {
        histogram.append(el("span", "bucket", `${score}: ${count}`));
      }
      panel.append(el("h4", "", "Final-score histogram"));
      panel.append(histogram);
    }
    root.append(panel);
  }
}

// -- response detail ------------------------------------------------------------------

function renderDetail(root: HTMLElement, detail: ResponseDetailController): void {
  root.replaceChildren();
  renderErrors(root, detail.errors, () => void detail.load());
  root.append(el("h2", "", "Response detail"));

  const picker = el("select") as HTMLSelectElement;
  picker.append(new Option("— pick a response —", ""));
  for (const response of detail.responses) {
    picker.append(new Option(response.id, response.id, false, response.id === detail.selected));
  }
  picker.addEventListener("change", () => {
    if (picker.value) void detail.select(picker.value);
  });
  root.append(picker);

  const response = detail.responses.find((r) => r.id === detail.selected);
  if (response) root.append(el("p", "student-text", response.text));

  if (detail.report) {
    root.append(
      el("h3", "", `Final score: ${detail.report.final_score} / ${detail.report.max_score}`),
    );
    for (const entry of detail.report.per_item) {
      const row = el("section", "card grade-row");
      row.append(el("h4", "", `${entry.item_id} — score ${entry.grade}`));
      row.append(el("p", "justification", entry.justification));
      for (const flag of ["relevant", "irrelevant"] as const) {
        const button = el("button", "", `mark ${flag}`);
        button.addEventListener("click", () => {
          void detail.flag(entry.item_id, flag, "instructor");
        });
        row.append(button);
      }
      root.append(row);
    }
  }
}

// -- reconciliation queue -----------------------------------------------------------------

function renderReconcile(root: HTMLElement, reconcile: ReconcileController): void {
  root.replaceChildren();
  renderErrors(root, reconcile.errors, () => void reconcile.load());
  root.append(el("h2", "", "Label reconciliation"));
  if (!reconcile.queue.reconciliation) {
    root.append(el("p", "muted", "No reconciliation in progress."));
    return;
  }
  root.append(
    el(
      "p",
      "",
      `${reconcile.queue.grader_a} vs ${reconcile.queue.grader_b} — ${reconcile.openCount} open`,
    ),
  );
  for (const disagreement of reconcile.queue.disagreements) {
    const row = el("section", "card disagreement");
    row.append(el("h4", "", `${disagreement.response_id} / ${disagreement.item_id}`));
    row.append(
      el("p", "", `A says ${disagreement.label_a}, B says ${disagreement.label_b}`),
    );
    if (disagreement.resolution !== null) {
      row.append(el("p", "ok", `resolved → ${disagreement.resolution} by ${disagreement.resolver_id}`));
    } else {
      for (const label of [0, 1] as const) {
        const button = el("button", "", `agree on ${label}`);
        button.addEventListener("click", () => {
          void reconcile.resolve(disagreement.key, label, "instructor");
        });
        row.append(button);
      }
    }
    root.append(row);
  }
}

// -- shell -------------------------------------------------------------------------------

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const assignments = await api.listAssignments();
  const first = assignments[0];
  if (!first) {
    root.textContent = "No assignments ingested yet — run `qagrader ingest` first.";
    return;
  }

  const review = new ReviewController(api, first.id);
  const runs = new RunController(api, first.id, 1000);
  const reconcile = new ReconcileController(api);
  let detail: ResponseDetailController | null = null;

  const nav = el("nav");
  const screens: Record<string, HTMLElement> = {
    review: el("main"),
    runs: el("main"),
    detail: el("main"),
    reconcile: el("main"),
  };
  let active = "review";

  const show = (name: string) => {
    active = name;
    for (const [key, screen] of Object.entries(screens)) {
      screen.style.display = key === name ? "block" : "none";
    }
    nav.querySelectorAll("button").forEach((button) => {
      button.classList.toggle("active", button.dataset.screen === name);
    });
  };

  for (const [name, label] of [
    ["review", "Review questions"],
    ["runs", "Runs"],
    ["detail", "Responses"],
    ["reconcile", "Reconcile"],
  ] as const) {
    const button = el("button", "", label);
    button.dataset.screen = name;
    button.addEventListener("click", () => show(name));
    nav.append(button);
  }
  root.append(nav, ...Object.values(screens));

  review.subscribe(() => renderReview(screens.review!, review));
  runs.subscribe(() =>
    renderRun(screens.runs!, runs, (runId) => {
      detail = new ResponseDetailController(api, first.id, runId);
      detail.subscribe(() => renderDetail(screens.detail!, detail!));
      void detail.load();
    }),
  );
  reconcile.subscribe(() => renderReconcile(screens.reconcile!, reconcile));

  await review.load();
  renderRun(screens.runs!, runs, () => undefined);
  await reconcile.load();
  show(active);
}

void boot();
