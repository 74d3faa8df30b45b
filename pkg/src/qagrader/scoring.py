"""Consolidate per-item binary grades into weighted final scores and a
unified per-response feedback document."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import IncompleteGradesError, PreconditionError
from .grading import STATUS_COMPLETE, GradeCell, GradingRun
from .models import RubricPoint, weight_to_json


@dataclass(frozen=True)
class PerItemScore:
    item_id: str
    grade: int
    weight: Fraction
    weighted_points: Fraction
    justification: str


@dataclass(frozen=True)
class ScoreReport:
    """Final weighted score plus the per-point breakdown for one response."""

    response_id: str
    per_item: tuple[PerItemScore, ...]
    final_score: Fraction
    max_score: Fraction
    unified_feedback: str

    def to_dict(self) -> dict:
        return {
            "response_id": self.response_id,
            "per_item": [
                {
                    "item_id": entry.item_id,
                    "grade": entry.grade,
                    "weight": weight_to_json(entry.weight),
                    "weighted_points": weight_to_json(entry.weighted_points),
                    "justification": entry.justification,
                }
                for entry in self.per_item
            ],
            "final_score": weight_to_json(self.final_score),
            "max_score": weight_to_json(self.max_score),
            "unified_feedback": self.unified_feedback,
        }


def format_score(value: Fraction) -> str:
    json_value = weight_to_json(value)
    return str(json_value)


def unify_feedback(
    per_item: Sequence[tuple[RubricPoint, int, str]],
    final_score: Fraction,
    max_score: Fraction,
) -> str:
    """Deterministic feedback document: one section per rubric point (text +
    grade + justification) in rubric order, then a final-score line."""
    sections = []
    for point, grade, justification in per_item:
        body = justification.strip() or "(no justification)"
        sections.append(f"[{point.text}] score {grade}\n{body}")
    sections.append(f"Final score: {format_score(final_score)} / {format_score(max_score)}")
    return "\n\n".join(sections)


def consolidate(cells: Sequence[GradeCell], rubric: Sequence[RubricPoint]) -> ScoreReport:
    """Weighted sum of one response's per-item grades, in rubric order.

    Exactly one cell per rubric point is required; the result is integral
    whenever all weights are integers.
    """
    if not cells:
        raise IncompleteGradesError("no grade cells supplied")
    response_ids = {c.response_id for c in cells}
    if len(response_ids) != 1:
        raise IncompleteGradesError(f"cells span multiple responses: {sorted(response_ids)}")
    by_item: dict[str, GradeCell] = {}
    for cell in cells:
        if cell.item_id in by_item:
            raise IncompleteGradesError(
                f"duplicate cell for item {cell.item_id!r} on response {cell.response_id!r}"
            )
        by_item[cell.item_id] = cell
    missing = [p.id for p in rubric if p.id not in by_item]
    if missing:
        raise IncompleteGradesError(f"missing grade cell(s) for item(s): {', '.join(missing)}")
    extras = set(by_item) - {p.id for p in rubric}
    if extras:
        raise IncompleteGradesError(f"cells for unknown item(s): {sorted(extras)}")

    per_item = []
    final = Fraction(0)
    for point in rubric:
        cell = by_item[point.id]
        weighted = point.weight * cell.grade
        final += weighted
        per_item.append(
            PerItemScore(
                item_id=point.id,
                grade=cell.grade,
                weight=point.weight,
                weighted_points=weighted,
                justification=cell.justification,
            )
        )
    max_score = sum((p.weight for p in rubric), Fraction(0))
    feedback = unify_feedback(
        [(point, by_item[point.id].grade, by_item[point.id].justification) for point in rubric],
        final,
        max_score,
    )
    return ScoreReport(
        response_id=cells[0].response_id,
        per_item=tuple(per_item),
        final_score=final,
        max_score=max_score,
        unified_feedback=feedback,
    )


def score_histogram(reports: Sequence[ScoreReport], max_score: Fraction) -> dict[str, int]:
    """Distribution of final scores. Integer buckets 0..max are always
    present when the maximum is integral; fractional scores get their own
    buckets."""
    counts: dict[str, int] = {}
    if max_score.denominator == 1:
        for value in range(int(max_score) + 1):
            counts[str(value)] = 0
    for report in reports:
        key = format_score(report.final_score)
        counts[key] = counts.get(key, 0) + 1
    return counts


def score_run(
    run: GradingRun, rubric: Sequence[RubricPoint]
) -> tuple[list[ScoreReport], dict[str, int]]:
    """One ScoreReport per evaluated response of a complete run, plus the
    final-score histogram."""
    if run.status != STATUS_COMPLETE:
        raise PreconditionError(f"run {run.run_id} is {run.status}, not complete")
    reports = []
    for rid in run.shot_set.eval_ids:
        cells = [run.cells[(rid, iid)] for iid in run.item_ids]
        reports.append(consolidate(cells, rubric))
    max_score = sum((p.weight for p in rubric), Fraction(0))
    return reports, score_histogram(reports, max_score)


def report_to_markdown(report: ScoreReport) -> str:
    """Human-readable per-response export."""
    lines = [
        f"# Response {report.response_id}",
        "",
        f"Final score: {format_score(report.final_score)} / {format_score(report.max_score)}",
        "",
    ]
    for entry in report.per_item:
        lines.append(f"## {entry.item_id} (score {entry.grade}, weight {weight_to_json(entry.weight)})")
        lines.append("")
        lines.append(entry.justification.strip() or "(no justification)")
        lines.append("")
    return "\n".join(lines)
