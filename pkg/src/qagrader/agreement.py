"""Inter-rater agreement (Cohen's kappa, raw agreement), two-grader
reconciliation into ground truth, and the shot-count ablation harness."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import NotFoundError, ValidationError
from .grading import GradingRun, grade_matrix
from .models import LabelSet, ROLE_GROUND_TRUTH, Assignment, StudentResponse
from .questions import EvaluationItem
from .shots import (
    METHOD_CLUSTERING,
    METHOD_RANDOM,
    EmbeddingMatrix,
    ExemplarFeedback,
    ShotSet,
    random_shots,
    select_shots,
)


@dataclass(frozen=True)
class ConfusionCounts:
    """Paired binary label counts; n01 = rater A said 0, rater B said 1."""

    n00: int = 0
    n01: int = 0
    n10: int = 0
    n11: int = 0

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]]) -> "ConfusionCounts":
        counts = [0, 0, 0, 0]
        for a, b in pairs:
            if a not in (0, 1) or b not in (0, 1):
                raise ValidationError(f"labels must be binary, got pair ({a!r}, {b!r})")
            counts[2 * a + b] += 1
        return cls(n00=counts[0], n01=counts[1], n10=counts[2], n11=counts[3])


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    p_observed: float
    p_expected: float
    counts: ConfusionCounts
    degenerate_marginals: bool = False


def cohen_kappa(pairs: Sequence[tuple[int, int]]) -> KappaResult:
    """Chance-corrected agreement kappa = (p_o - p_e) / (1 - p_e) with
    marginal-product chance agreement.

    When both raters are constant and equal (p_e = 1) the formula is
    indeterminate; by convention the result is 1 when p_o = 1 and 0
    otherwise, flagged degenerate.
    """
    if not pairs:
        raise ValidationError("cannot compute agreement over zero pairs")
    counts = ConfusionCounts.from_pairs(pairs)
    n = counts.total
    p_o = (counts.n00 + counts.n11) / n
    a1 = (counts.n10 + counts.n11) / n
    b1 = (counts.n01 + counts.n11) / n
    p_e = a1 * b1 + (1 - a1) * (1 - b1)
    if p_e == 1.0:
        return KappaResult(
            kappa=1.0 if p_o == 1.0 else 0.0,
            p_observed=p_o,
            p_expected=p_e,
            counts=counts,
            degenerate_marginals=True,
        )
    return KappaResult(
        kappa=(p_o - p_e) / (1 - p_e), p_observed=p_o, p_expected=p_e, counts=counts
    )


def raw_agreement(pairs: Sequence[tuple[int, int]]) -> float:
    """Fraction of cells where the two raters assign identical labels."""
    if not pairs:
        raise ValidationError("cannot compute agreement over zero pairs")
    counts = ConfusionCounts.from_pairs(pairs)
    return (counts.n00 + counts.n11) / counts.total


@dataclass(frozen=True)
class FlattenedPairs:
    pairs: tuple[tuple[int, int], ...]
    excluded: int
    keys: tuple[tuple[str, str], ...]


def _cells_of(source: GradingRun | LabelSet) -> Mapping[tuple[str, str], int]:
    if isinstance(source, GradingRun):
        return {key: cell.grade for key, cell in source.cells.items()}
    return dict(source.cells)


def flatten_for_agreement(
    candidate: GradingRun | LabelSet,
    ground_truth: LabelSet,
    item_order: Sequence[str],
) -> FlattenedPairs:
    """Pair up (candidate, ground truth) labels over their shared cells in a
    deterministic order (response_id, then the given item order).

    Cells missing from either side are excluded and counted; zero overlap is
    an error.
    """
    left = _cells_of(candidate)
    right = _cells_of(ground_truth)
    item_rank = {iid: i for i, iid in enumerate(item_order)}
    shared = sorted(
        (key for key in left.keys() & right.keys() if key[1] in item_rank),
        key=lambda key: (key[0], item_rank[key[1]]),
    )
    excluded = len(left.keys() | right.keys()) - len(shared)
    if not shared:
        raise ValidationError("candidate and ground truth share no cells")
    pairs = tuple((left[key], right[key]) for key in shared)
    return FlattenedPairs(pairs=pairs, excluded=excluded, keys=tuple(shared))


def final_score_agreement(
    candidate: GradingRun | LabelSet,
    ground_truth: LabelSet,
    rubric,
) -> dict:
    """Secondary agreement view at whole-response grain: weighted final
    scores compared per response, over responses both sides cover completely.

    The per-item cell view stays the primary metric; this reports how often
    the resulting final grades coincide.
    """
    left = _cells_of(candidate)
    right = _cells_of(ground_truth)
    weights = {point.id: point.weight for point in rubric}

    def finals(cells) -> dict[str, object]:
        by_response: dict[str, dict[str, int]] = {}
        for (rid, iid), label in cells.items():
            if iid in weights:
                by_response.setdefault(rid, {})[iid] = label
        return {
            rid: sum(weights[iid] * label for iid, label in grades.items())
            for rid, grades in by_response.items()
            if set(grades) == set(weights)
        }

    left_finals = finals(left)
    right_finals = finals(right)
    shared = sorted(left_finals.keys() & right_finals.keys())
    if not shared:
        return {"n_responses": 0, "exact_match": None, "mean_abs_diff": None}
    matches = sum(1 for rid in shared if left_finals[rid] == right_finals[rid])
    mean_abs = sum(abs(left_finals[rid] - right_finals[rid]) for rid in shared) / len(shared)
    return {
        "n_responses": len(shared),
        "exact_match": matches / len(shared),
        "mean_abs_diff": float(mean_abs),
    }


@dataclass
class Disagreement:
    """One cell two graders label differently, awaiting an agreed resolution."""

    response_id: str
    item_id: str
    label_a: int
    label_b: int
    resolution: int | None = None
    resolver_id: str | None = None

    @property
    def key(self) -> str:
        return f"{self.response_id}:{self.item_id}"

    def to_dict(self) -> dict:
        return {
            "response_id": self.response_id,
            "item_id": self.item_id,
            "label_a": self.label_a,
            "label_b": self.label_b,
            "resolution": self.resolution,
            "resolver_id": self.resolver_id,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Disagreement":
        return cls(
            response_id=str(doc["response_id"]),
            item_id=str(doc["item_id"]),
            label_a=int(doc["label_a"]),
            label_b=int(doc["label_b"]),
            resolution=doc.get("resolution"),
            resolver_id=doc.get("resolver_id"),
        )


@dataclass
class Reconciliation:
    """Output of comparing two graders: a draft ground truth from agreeing
    cells plus the disagreements to be discussed and resolved."""

    grader_a: str
    grader_b: str
    ground_truth: LabelSet
    disagreements: list[Disagreement] = field(default_factory=list)
    only_in_a: list[tuple[str, str]] = field(default_factory=list)
    only_in_b: list[tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return all(d.resolution is not None for d in self.disagreements)

    def to_dict(self) -> dict:
        return {
            "grader_a": self.grader_a,
            "grader_b": self.grader_b,
            "ground_truth": {
                "grader_id": self.ground_truth.grader_id,
                "role": self.ground_truth.role,
                "cells": [
                    {"response_id": rid, "item_id": iid, "label": label}
                    for (rid, iid), label in sorted(self.ground_truth.cells.items())
                ],
            },
            "disagreements": [d.to_dict() for d in self.disagreements],
            "only_in_a": [list(key) for key in self.only_in_a],
            "only_in_b": [list(key) for key in self.only_in_b],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Reconciliation":
        gt = doc["ground_truth"]
        return cls(
            grader_a=str(doc["grader_a"]),
            grader_b=str(doc["grader_b"]),
            ground_truth=LabelSet(
                grader_id=str(gt["grader_id"]),
                role=str(gt["role"]),
                cells={
                    (str(c["response_id"]), str(c["item_id"])): int(c["label"])
                    for c in gt["cells"]
                },
            ),
            disagreements=[Disagreement.from_dict(d) for d in doc.get("disagreements", ())],
            only_in_a=[tuple(key) for key in doc.get("only_in_a", ())],
            only_in_b=[tuple(key) for key in doc.get("only_in_b", ())],
        )


def reconcile(label_set_a: LabelSet, label_set_b: LabelSet) -> Reconciliation:
    """Copy agreeing cells into a draft ground truth and emit a Disagreement
    per differing cell; cells labeled by only one grader are flagged."""
    a, b = label_set_a.cells, label_set_b.cells
    shared = sorted(a.keys() & b.keys())
    if not shared:
        raise ValidationError("the two label sets share no cells")
    agreed: dict[tuple[str, str], int] = {}
    disagreements: list[Disagreement] = []
    for key in shared:
        if a[key] == b[key]:
            agreed[key] = a[key]
        else:
            disagreements.append(
                Disagreement(
                    response_id=key[0], item_id=key[1], label_a=a[key], label_b=b[key]
                )
            )
    return Reconciliation(
        grader_a=label_set_a.grader_id,
        grader_b=label_set_b.grader_id,
        ground_truth=LabelSet(
            grader_id=f"reconciled:{label_set_a.grader_id}+{label_set_b.grader_id}",
            role=ROLE_GROUND_TRUTH,
            cells=agreed,
        ),
        disagreements=disagreements,
        only_in_a=sorted(a.keys() - b.keys()),
        only_in_b=sorted(b.keys() - a.keys()),
    )


def resolve_disagreement(
    reconciliation: Reconciliation,
    response_id: str,
    item_id: str,
    label: int,
    resolver_id: str,
) -> Disagreement:
    """Write the agreed label for one disagreement into the ground truth."""
    if label not in (0, 1):
        raise ValidationError(f"resolution label must be 0 or 1, got {label!r}")
    for i, disagreement in enumerate(reconciliation.disagreements):
        if disagreement.response_id == response_id and disagreement.item_id == item_id:
            resolved = replace(disagreement, resolution=label, resolver_id=resolver_id)
            reconciliation.disagreements[i] = resolved
            cells = dict(reconciliation.ground_truth.cells)
            cells[(response_id, item_id)] = label
            reconciliation.ground_truth = LabelSet(
                grader_id=reconciliation.ground_truth.grader_id,
                role=reconciliation.ground_truth.role,
                cells=cells,
            )
            return resolved
    raise NotFoundError(f"no disagreement recorded for ({response_id}, {item_id})")


@dataclass(frozen=True)
class AblationPoint:
    method: str
    shots: int
    kappa: float
    raw: float
    n_pairs: int
    run_id: str

    def __post_init__(self):
        if not -1.0 - 1e-12 <= self.kappa <= 1.0 + 1e-12:
            raise ValidationError(f"kappa out of [-1, 1]: {self.kappa}")
        if not 0.0 <= self.raw <= 1.0:
            raise ValidationError(f"raw agreement out of [0, 1]: {self.raw}")


def ablation_sweep(
    assignment: Assignment,
    items: Sequence[EvaluationItem],
    corpus: Sequence[StudentResponse],
    matrix: EmbeddingMatrix,
    ground_truth: LabelSet,
    shot_counts: Sequence[int],
    methods: Sequence[str],
    seed: int,
    backend,
    feedback: Mapping[str, Mapping[str, ExemplarFeedback]],
    *,
    template=None,
    run_prefix: str = "ablation",
    on_run=None,
) -> list[AblationPoint]:
    """Grade the evaluation partition for every (method, shot count) pair and
    score agreement against ground truth restricted to the eval responses."""
    item_order = [i.item_id for i in items]
    points: list[AblationPoint] = []
    for method in methods:
        if method not in (METHOD_CLUSTERING, METHOD_RANDOM):
            raise ValidationError(f"unknown selection method {method!r}")
        for k in shot_counts:
            if method == METHOD_CLUSTERING:
                shot_set = select_shots(corpus, matrix, k, seed)
            else:
                shot_set = random_shots(corpus, k, seed)
            shot_set = shot_set.with_feedback(feedback)
            run = GradingRun(
                run_id=f"{run_prefix}-{method}-{k}",
                assignment_id=assignment.id,
                shot_set=shot_set,
                backend_id=getattr(backend, "backend_id", "unknown"),
                item_ids=tuple(item_order),
            )
            grade_matrix(
                run, backend, assignment=assignment, items=items, corpus=corpus,
                template=template,
            )
            flattened = flatten_for_agreement(run, ground_truth, item_order)
            result = cohen_kappa(flattened.pairs)
            points.append(
                AblationPoint(
                    method=method,
                    shots=k,
                    kappa=result.kappa,
                    raw=raw_agreement(flattened.pairs),
                    n_pairs=len(flattened.pairs),
                    run_id=run.run_id,
                )
            )
            if on_run is not None:
                on_run(run)
    return points


def ablation_csv(points: Sequence[AblationPoint]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["method", "shots", "kappa", "raw", "n_pairs"])
    for point in points:
        writer.writerow(
            [point.method, point.shots, f"{point.kappa:.6f}", f"{point.raw:.6f}", point.n_pairs]
        )
    return buffer.getvalue()


def ablation_points_from_csv(text: str) -> list[AblationPoint]:
    reader = csv.DictReader(io.StringIO(text))
    points = []
    for row in reader:
        points.append(
            AblationPoint(
                method=row["method"],
                shots=int(row["shots"]),
                kappa=float(row["kappa"]),
                raw=float(row["raw"]),
                n_pairs=int(row["n_pairs"]),
                run_id=row.get("run_id", ""),
            )
        )
    return points


_SERIES_COLORS = ("#1f6fb2", "#c24d2c", "#3a7d44", "#7d3a6f")


def ablation_svg(points: Sequence[AblationPoint], *, width: int = 640, height: int = 400) -> str:
    """Line chart of kappa vs shot count, one series per selection method.

    Hand-rolled SVG so the output is byte-deterministic.
    """
    if not points:
        raise ValidationError("no ablation points to plot")
    margin_left, margin_right, margin_top, margin_bottom = 60, 150, 20, 45
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom
    xs = sorted({p.shots for p in points})
    x_min, x_max = min(xs), max(xs)
    x_span = max(x_max - x_min, 1)
    y_min = min(0.0, min(p.kappa for p in points))
    y_max = 1.0

    def x_pos(shots: float) -> float:
        return margin_left + (shots - x_min) / x_span * plot_w

    def y_pos(kappa: float) -> float:
        return margin_top + (y_max - kappa) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin_left}" y1="{margin_top}" x2="{margin_left}" '
        f'y2="{margin_top + plot_h}" stroke="#444"/>',
        f'<line x1="{margin_left}" y1="{margin_top + plot_h}" '
        f'x2="{margin_left + plot_w}" y2="{margin_top + plot_h}" stroke="#444"/>',
    ]
    tick = y_min
    while tick <= y_max + 1e-9:
        y = y_pos(tick)
        parts.append(
            f'<line x1="{margin_left - 4}" y1="{y:.1f}" x2="{margin_left}" y2="{y:.1f}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{margin_left - 8}" y="{y + 4:.1f}" font-size="11" '
            f'text-anchor="end" fill="#333">{tick:.1f}</text>'
        )
        tick += 0.2
    for shots in xs:
        x = x_pos(shots)
        parts.append(
            f'<line x1="{x:.1f}" y1="{margin_top + plot_h}" x2="{x:.1f}" '
            f'y2="{margin_top + plot_h + 4}" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{margin_top + plot_h + 18}" font-size="11" '
            f'text-anchor="middle" fill="#333">{shots}</text>'
        )
    parts.append(
        f'<text x="{margin_left + plot_w / 2:.1f}" y="{height - 8}" font-size="12" '
        f'text-anchor="middle" fill="#333">shots</text>'
    )
    parts.append(
        f'<text x="18" y="{margin_top + plot_h / 2:.1f}" font-size="12" text-anchor="middle" '
        f'fill="#333" transform="rotate(-90 18 {margin_top + plot_h / 2:.1f})">kappa</text>'
    )

    methods = sorted({p.method for p in points})
    for index, method in enumerate(methods):
        color = _SERIES_COLORS[index % len(_SERIES_COLORS)]
        series = sorted((p for p in points if p.method == method), key=lambda p: p.shots)
        coords = " ".join(f"{x_pos(p.shots):.1f},{y_pos(p.kappa):.1f}" for p in series)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for p in series:
            parts.append(
                f'<circle cx="{x_pos(p.shots):.1f}" cy="{y_pos(p.kappa):.1f}" r="3" fill="{color}"/>'
            )
        legend_y = margin_top + 14 + index * 18
        parts.append(
            f'<line x1="{margin_left + plot_w + 12}" y1="{legend_y}" '
            f'x2="{margin_left + plot_w + 36}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{margin_left + plot_w + 42}" y="{legend_y + 4}" font-size="11" '
            f'fill="#333">{method}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
