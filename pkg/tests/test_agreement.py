from __future__ import annotations

import itertools

import pytest
from hypothesis import given, strategies as st

from qagrader.errors import NotFoundError, ValidationError
from qagrader.gateway import OracleBackend, TestEmbeddingBackend
from qagrader.grading import GradeCell, GradingRun
from qagrader.models import LabelSet
from qagrader.agreement import (
    AblationPoint,
    ConfusionCounts,
    Reconciliation,
    ablation_csv,
    ablation_points_from_csv,
    ablation_svg,
    ablation_sweep,
    cohen_kappa,
    final_score_agreement,
    flatten_for_agreement,
    raw_agreement,
    reconcile,
    resolve_disagreement,
)
from qagrader.questions import approve_question, build_evaluation_items, ScriptedQuestionBackend
from qagrader.shots import ShotSet, embed_responses


def direct_kappa(pairs):
    """Independent evaluation of (p_o - p_e) / (1 - p_e), written differently
    from the implementation (explicit marginals, no ConfusionCounts)."""
    n = len(pairs)
    p_o = sum(1 for a, b in pairs if a == b) / n
    pa1 = sum(a for a, _ in pairs) / n
    pb1 = sum(b for _, b in pairs) / n
    p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1 - p_e)


class TestCohenKappa:
    def test_hand_example_zero_kappa(self):
        pairs = list(zip([1, 1, 0, 0], [1, 0, 1, 0]))
        result = cohen_kappa(pairs)
        assert result.p_observed == 0.5
        assert result.p_expected == 0.5
        assert result.kappa == 0.0
        assert raw_agreement(pairs) == 0.5

    def test_perfect_agreement(self):
        pairs = list(zip([1, 0, 1, 1], [1, 0, 1, 1]))
        result = cohen_kappa(pairs)
        assert result.kappa == 1.0
        assert raw_agreement(pairs) == 1.0

    def test_degenerate_constant_raters_flagged(self):
        result = cohen_kappa([(1, 1), (1, 1)])
        assert result.degenerate_marginals
        assert result.kappa == 1.0

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            cohen_kappa([])
        with pytest.raises(ValidationError):
            raw_agreement([])

    def test_non_binary_label_rejected(self):
        with pytest.raises(ValidationError):
            cohen_kappa([(0, 2)])

    def test_exhaustive_length_four_vectors_match_direct_formula(self):
        vectors = list(itertools.product([0, 1], repeat=4))
        for a in vectors:
            for b in vectors:
                pairs = list(zip(a, b))
                result = cohen_kappa(pairs)
                assert result.kappa == pytest.approx(direct_kappa(pairs), abs=1e-12)
                assert -1.0 <= result.kappa <= 1.0

    @given(
        st.lists(
            st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=50
        )
    )
    def test_symmetry_and_label_flip_invariance(self, pairs):
        flipped_raters = [(b, a) for a, b in pairs]
        relabeled = [(1 - a, 1 - b) for a, b in pairs]
        base = cohen_kappa(pairs).kappa
        assert cohen_kappa(flipped_raters).kappa == pytest.approx(base, abs=1e-12)
        assert cohen_kappa(relabeled).kappa == pytest.approx(base, abs=1e-12)
        assert base <= 1.0 + 1e-12
        assert 0.0 <= raw_agreement(pairs) <= 1.0

    def test_confusion_counts(self):
        counts = ConfusionCounts.from_pairs([(0, 0), (0, 1), (1, 0), (1, 1), (1, 1)])
        assert (counts.n00, counts.n01, counts.n10, counts.n11) == (1, 1, 1, 2)
        assert counts.total == 5


def _label_set(cells, grader_id="g", role="grader"):
    return LabelSet(grader_id=grader_id, role=role, cells=cells)


def _grid(response_count, item_ids, value=1):
    return {
        (f"r{i:03d}", iid): value for i in range(response_count) for iid in item_ids
    }


class TestFlatten:
    def test_full_overlap_pair_count(self):
        items = ["p1", "p2", "p3", "p4"]
        run_cells = _grid(169, items)
        truth = _label_set(_grid(169, items), "gt", "ground_truth")
        flattened = flatten_for_agreement(_label_set(run_cells), truth, items)
        assert len(flattened.pairs) == 676
        assert flattened.excluded == 0

    def test_missing_cells_excluded_with_count(self):
        items = ["p1", "p2", "p3", "p4"]
        candidate = _label_set(_grid(169, items))
        truth_cells = _grid(169, items)
        for key in list(truth_cells)[:10]:
            del truth_cells[key]
        flattened = flatten_for_agreement(
            candidate, _label_set(truth_cells, "gt", "ground_truth"), items
        )
        assert len(flattened.pairs) == 666
        assert flattened.excluded == 10

    def test_disjoint_cells_rejected(self):
        items = ["p1"]
        candidate = _label_set({("a", "p1"): 1})
        truth = _label_set({("b", "p1"): 1}, "gt", "ground_truth")
        with pytest.raises(ValidationError):
            flatten_for_agreement(candidate, truth, items)

    def test_run_as_candidate_and_deterministic_order(self):
        run = GradingRun(
            run_id="r",
            assignment_id="a",
            shot_set=ShotSet(method="random", k=0, seed=0, shot_ids=(), eval_ids=("r2", "r1")),
            backend_id="oracle",
            item_ids=("p2", "p1"),
            status="complete",
        )
        for rid in ("r1", "r2"):
            for iid in ("p1", "p2"):
                run.cells[(rid, iid)] = GradeCell(
                    response_id=rid, item_id=iid, grade=1, justification="x"
                )
        truth = _label_set(
            {(rid, iid): 1 for rid in ("r1", "r2") for iid in ("p1", "p2")},
            "gt",
            "ground_truth",
        )
        flattened = flatten_for_agreement(run, truth, ["p2", "p1"])
        assert flattened.keys == (("r1", "p2"), ("r1", "p1"), ("r2", "p2"), ("r2", "p1"))


class TestFinalScoreView:
    def _rubric(self, weights=(1, 1)):
        from fractions import Fraction

        from qagrader.models import RubricPoint

        return tuple(
            RubricPoint(id=f"p{i}", text=f"point {i}", weight=Fraction(w))
            for i, w in enumerate(weights, start=1)
        )

    def test_exact_match_and_mean_abs_diff(self):
        rubric = self._rubric()
        candidate = _label_set(
            {("r1", "p1"): 1, ("r1", "p2"): 1, ("r2", "p1"): 0, ("r2", "p2"): 0}
        )
        truth = _label_set(
            {("r1", "p1"): 1, ("r1", "p2"): 1, ("r2", "p1"): 1, ("r2", "p2"): 1},
            "gt",
            "ground_truth",
        )
        view = final_score_agreement(candidate, truth, rubric)
        assert view["n_responses"] == 2
        assert view["exact_match"] == 0.5  # r1 matches (2 vs 2), r2 differs (0 vs 2)
        assert view["mean_abs_diff"] == 1.0

    def test_offsetting_cell_errors_still_match_on_final(self):
        # per-item agreement is imperfect but the weighted finals coincide
        rubric = self._rubric()
        candidate = _label_set({("r1", "p1"): 1, ("r1", "p2"): 0})
        truth = _label_set({("r1", "p1"): 0, ("r1", "p2"): 1}, "gt", "ground_truth")
        view = final_score_agreement(candidate, truth, rubric)
        assert view == {"n_responses": 1, "exact_match": 1.0, "mean_abs_diff": 0.0}

    def test_partially_covered_responses_excluded(self):
        rubric = self._rubric()
        candidate = _label_set({("r1", "p1"): 1})  # p2 missing: no full final score
        truth = _label_set({("r1", "p1"): 1, ("r1", "p2"): 1}, "gt", "ground_truth")
        view = final_score_agreement(candidate, truth, rubric)
        assert view == {"n_responses": 0, "exact_match": None, "mean_abs_diff": None}


class TestReconcile:
    def test_identical_sets_reconcile_cleanly(self):
        cells = _grid(3, ["p1", "p2"])
        rec = reconcile(_label_set(cells, "a"), _label_set(cells, "b"))
        assert rec.disagreements == []
        assert rec.ground_truth.cells == cells
        assert rec.ground_truth.role == "ground_truth"
        assert rec.complete

    def test_single_difference_then_resolution(self):
        cells_a = _grid(2, ["p1"])
        cells_b = dict(cells_a)
        cells_b[("r000", "p1")] = 0
        rec = reconcile(_label_set(cells_a, "a"), _label_set(cells_b, "b"))
        assert len(rec.disagreements) == 1
        assert not rec.complete
        assert ("r000", "p1") not in rec.ground_truth.cells

        resolved = resolve_disagreement(rec, "r000", "p1", 1, "instructor")
        assert resolved.resolution == 1
        assert rec.ground_truth.cells[("r000", "p1")] == 1
        assert rec.complete

    def test_partial_coverage_flagged(self):
        cells_a = _grid(175, ["p1", "p2", "p3", "p4"])  # 700 cells
        cells_b = dict(cells_a)
        for key in list(cells_b)[:4]:
            del cells_b[key]  # B labeled 696
        rec = reconcile(_label_set(cells_a, "a"), _label_set(cells_b, "b"))
        assert len(rec.ground_truth.cells) == 696
        assert len(rec.only_in_a) == 4
        assert rec.only_in_b == []

    def test_resolving_nonexistent_disagreement_rejected(self):
        cells = _grid(2, ["p1"])
        rec = reconcile(_label_set(cells, "a"), _label_set(cells, "b"))
        with pytest.raises(NotFoundError):
            resolve_disagreement(rec, "r000", "p1", 1, "x")

    def test_document_round_trip(self):
        cells_a = _grid(2, ["p1"])
        cells_b = dict(cells_a)
        cells_b[("r001", "p1")] = 0
        rec = reconcile(_label_set(cells_a, "a"), _label_set(cells_b, "b"))
        resolve_disagreement(rec, "r001", "p1", 0, "instructor")
        reloaded = Reconciliation.from_dict(rec.to_dict())
        assert reloaded.ground_truth == rec.ground_truth
        assert reloaded.disagreements == rec.disagreements


class TestAblation:
    @pytest.fixture
    def pipeline(self, fixture_assignment, fixture_responses):
        backend = ScriptedQuestionBackend(
            {p.id: [f"q for {p.id}?"] for p in fixture_assignment.rubric}
        )
        items = [
            approve_question(item, item.candidates[0])
            for item in build_evaluation_items(fixture_assignment, backend, k=1)
        ]
        matrix = embed_responses(fixture_responses, TestEmbeddingBackend(64))
        import json

        from qagrader import fixture as fixture_pkg
        from qagrader.shots import feedback_map_from_document

        feedback = feedback_map_from_document(
            json.loads(fixture_pkg.FEEDBACK.read_text(encoding="utf-8"))
        )
        truth_cells = {}
        for line in fixture_pkg.GROUND_TRUTH_LABELS.read_text(encoding="utf-8").splitlines():
            row = json.loads(line)
            truth_cells[(row["response_id"], row["item_id"])] = row["label"]
        truth = LabelSet(grader_id="adjudicated", role="ground_truth", cells=truth_cells)
        return fixture_assignment, items, fixture_responses, matrix, truth, feedback

    def test_oracle_sweep_is_self_consistent(self, pipeline):
        assignment, items, responses, matrix, truth, feedback = pipeline
        points = ablation_sweep(
            assignment,
            items,
            responses,
            matrix,
            truth,
            shot_counts=[1, 2],
            methods=["clustering", "random"],
            seed=0,
            backend=OracleBackend(),
            feedback=feedback,
        )
        assert len(points) == 4
        for point in points:
            assert point.kappa == pytest.approx(1.0)
            assert point.raw == pytest.approx(1.0)
            assert point.n_pairs == (len(responses) - point.shots) * len(items)

    def test_csv_round_trip_and_svg_shape(self, pipeline):
        assignment, items, responses, matrix, truth, feedback = pipeline
        points = ablation_sweep(
            assignment, items, responses, matrix, truth, [1], ["clustering", "random"],
            0, OracleBackend(), feedback,
        )
        csv_text = ablation_csv(points)
        assert csv_text.splitlines()[0] == "method,shots,kappa,raw,n_pairs"
        assert len(csv_text.splitlines()) == 3
        reloaded = ablation_points_from_csv(csv_text)
        assert [(p.method, p.shots) for p in reloaded] == [(p.method, p.shots) for p in points]

        svg = ablation_svg(points)
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 2
        assert "kappa" in svg and "shots" in svg
        assert ablation_svg(points) == svg  # deterministic bytes

    def test_ablation_point_bounds_enforced(self):
        with pytest.raises(ValidationError):
            AblationPoint(method="random", shots=1, kappa=1.5, raw=0.5, n_pairs=4, run_id="x")
        with pytest.raises(ValidationError):
            AblationPoint(method="random", shots=1, kappa=0.5, raw=1.5, n_pairs=4, run_id="x")
