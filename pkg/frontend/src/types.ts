// Mirrors of the grading service's API payloads. The UI never invents state:
// every field here comes straight off the wire.

export interface RubricPoint {
  id: string;
  text: string;
  weight: number | string;
}

export interface Assignment {
  id: string;
  problem_text: string;
  reference_answer: string;
  rubric: RubricPoint[];
  max_score: number | string;
  version: number;
}

export interface EvaluationItem {
  item_id: string;
  item_ref: string;
  rubric_point_id: string;
  candidates: string[];
  approved_question: string | null;
  gold_answer: string;
  gold_excerpt: string;
  question_specific_instruction: string | null;
  status: "pending" | "approved";
  version: number;
}

export interface ItemsPayload {
  assignment_id: string;
  document_version: number;
  items: EvaluationItem[];
}

export interface ResponseRow {
  id: string;
  text: string;
}

export interface GradeCell {
  response_id: string;
  item_id: string;
  grade: 0 | 1;
  justification: string;
  relevance_flag: "relevant" | "irrelevant" | null;
  prompt_hash: string | null;
}

export interface RunProgress {
  total: number;
  resolved: number;
  failed: number;
  pending: number;
}

export interface RunSummary {
  run_id: string;
  assignment_id: string;
  status: string;
  backend: string;
  shots: number;
  progress: RunProgress;
  version: number;
}

export interface RunDetail {
  run_id: string;
  assignment_id: string;
  status: "pending" | "running" | "complete" | "failed";
  backend: string;
  item_ids: string[];
  cells: GradeCell[];
  progress: RunProgress;
  version: number;
}

export interface PerItemScore {
  item_id: string;
  grade: 0 | 1;
  weight: number | string;
  weighted_points: number | string;
  justification: string;
}

export interface ScoreReport {
  response_id: string;
  per_item: PerItemScore[];
  final_score: number | string;
  max_score: number | string;
  unified_feedback: string;
}

export interface ReportsPayload {
  run_id: string;
  histogram: Record<string, number>;
  reports: ScoreReport[];
}

export interface Disagreement {
  key: string;
  response_id: string;
  item_id: string;
  label_a: 0 | 1;
  label_b: 0 | 1;
  resolution: 0 | 1 | null;
  resolver_id: string | null;
}

export interface DisagreementsPayload {
  reconciliation: string | null;
  version: number | null;
  grader_a?: string;
  grader_b?: string;
  complete?: boolean;
  disagreements: Disagreement[];
}

export interface ShotConfig {
  method: "clustering" | "random";
  k: number;
  seed: number;
}
