from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qagrader.errors import ValidationError
from qagrader.gateway import TestEmbeddingBackend
from qagrader.models import StudentResponse
from qagrader.shots import (
    EmbeddingMatrix,
    ShotSet,
    embed_responses,
    embedding_cache_from_jsonl,
    embedding_cache_to_jsonl,
    kmeans,
    random_shots,
    select_shots,
)

FOUR_POINTS = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])


def brute_force_sse(points: np.ndarray, k: int) -> float:
    """Independent oracle: minimum within-cluster SSE over every assignment
    of points into at most k non-empty clusters, centroids at cluster means."""
    n = len(points)
    best = float("inf")
    for assignment in itertools.product(range(k), repeat=n):
        sse = 0.0
        for cluster in set(assignment):
            members = points[[i for i in range(n) if assignment[i] == cluster]]
            centroid = members.mean(axis=0)
            sse += float(((members - centroid) ** 2).sum())
        best = min(best, sse)
    return best


class TestKMeans:
    def test_two_cluster_hand_example_matches_brute_force(self):
        result = kmeans(FOUR_POINTS, k=2, seed=0)
        assert result.inertia == pytest.approx(brute_force_sse(FOUR_POINTS, 2))
        assert result.inertia == pytest.approx(1.0)
        got = {tuple(c) for c in np.round(result.centroids, 9)}
        assert got == {(0.0, 0.5), (10.0, 10.5)}

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_matches_brute_force_on_random_points(self, k):
        rng = np.random.default_rng(7)
        points = rng.normal(size=(6, 2))
        result = kmeans(points, k=k, seed=3)
        assert result.inertia == pytest.approx(brute_force_sse(points, k), abs=1e-9)

    def test_k_equals_n_zero_inertia(self):
        result = kmeans(FOUR_POINTS, k=4, seed=1)
        assert result.inertia == pytest.approx(0.0)
        assert sorted(map(tuple, result.centroids)) == sorted(map(tuple, FOUR_POINTS))

    def test_k_one_is_componentwise_mean(self):
        result = kmeans(FOUR_POINTS, k=1, seed=0)
        assert np.allclose(result.centroids[0], FOUR_POINTS.mean(axis=0))

    def test_k_larger_than_n_rejected(self):
        with pytest.raises(ValidationError):
            kmeans(FOUR_POINTS, k=5, seed=0)

    def test_identical_points_tolerate_empty_clusters(self):
        points = np.ones((5, 3))
        result = kmeans(points, k=2, seed=0)
        assert result.inertia == pytest.approx(0.0)

    def test_deterministic_bit_for_bit(self):
        rng = np.random.default_rng(11)
        points = rng.normal(size=(30, 5))
        first = kmeans(points, k=4, seed=42)
        second = kmeans(points, k=4, seed=42)
        assert np.array_equal(first.centroids, second.centroids)
        assert np.array_equal(first.assignments, second.assignments)
        assert first.inertia == second.inertia
        assert first.inertia_history == second.inertia_history

    def test_inertia_history_non_increasing(self):
        rng = np.random.default_rng(5)
        points = rng.normal(size=(60, 4))
        for seed in range(3):
            result = kmeans(points, k=5, seed=seed)
            history = result.inertia_history
            assert all(a >= b - 1e-9 for a, b in zip(history, history[1:]))

    @pytest.mark.parametrize("seed", range(5))
    def test_recovers_well_separated_blobs(self, seed):
        rng = np.random.default_rng(seed)
        centers = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]])
        points = np.vstack([center + rng.normal(scale=1.0, size=(25, 2)) for center in centers])
        planted = np.repeat([0, 1, 2], 25)
        result = kmeans(points, k=3, seed=seed)
        mapping = {}
        for got, want in zip(result.assignments, planted):
            assert mapping.setdefault(got, want) == want
        assert len(mapping) == 3


def _matrix(points: np.ndarray, ids: list[str]) -> EmbeddingMatrix:
    return EmbeddingMatrix(response_ids=tuple(ids), vectors=points, normalized=False)


def _responses(ids: list[str]) -> list[StudentResponse]:
    return [StudentResponse(id=rid, text=f"text of {rid}") for rid in ids]


class TestSelectShots:
    def test_hand_example_tie_breaks_to_lowest_id(self):
        ids = ["r1", "r2", "r3", "r4"]
        shot_set = select_shots(_responses(ids), _matrix(FOUR_POINTS, ids), k=2, seed=0)
        assert set(shot_set.shot_ids) == {"r1", "r3"}
        assert set(shot_set.eval_ids) == {"r2", "r4"}

    def test_k_one_picks_nearest_to_global_mean(self):
        ids = ["a", "b", "c", "d"]
        shot_set = select_shots(_responses(ids), _matrix(FOUR_POINTS, ids), k=1, seed=0)
        # mean is (5, 5.5); nearest points are b=(0,1) and c=(10,10) -- c wins
        mean = FOUR_POINTS.mean(axis=0)
        nearest = ids[int(np.argmin(np.linalg.norm(FOUR_POINTS - mean, axis=1)))]
        assert shot_set.shot_ids == (nearest,)

    def test_duplicate_points_skip_to_next_nearest(self):
        points = np.zeros((3, 2))
        ids = ["x", "y", "z"]
        shot_set = select_shots(_responses(ids), _matrix(points, ids), k=2, seed=0)
        assert shot_set.shot_ids == ("x", "y")  # identical distances, id order

    def test_partition_and_determinism(self, fixture_responses):
        matrix = embed_responses(fixture_responses, TestEmbeddingBackend(64))
        for k in (1, 2, 4, 6):
            first = select_shots(fixture_responses, matrix, k, seed=9)
            second = select_shots(fixture_responses, matrix, k, seed=9)
            assert first == second
            assert len(first.shot_ids) == k
            assert set(first.shot_ids) | set(first.eval_ids) == {r.id for r in fixture_responses}
            assert not set(first.shot_ids) & set(first.eval_ids)

    def test_eval_set_must_be_non_empty(self):
        ids = ["r1", "r2"]
        with pytest.raises(ValidationError):
            select_shots(_responses(ids), _matrix(FOUR_POINTS[:2], ids), k=2, seed=0)

    def test_misaligned_matrix_rejected(self):
        ids = ["r1", "r2", "r3", "r4"]
        with pytest.raises(ValidationError):
            select_shots(_responses(ids[::-1]), _matrix(FOUR_POINTS, ids), k=1, seed=0)


class TestRandomShots:
    def test_same_seed_same_partition(self):
        responses = _responses([f"r{i:03d}" for i in range(50)])
        assert random_shots(responses, 6, seed=4) == random_shots(responses, 6, seed=4)

    def test_zero_shot_keeps_everything_for_eval(self):
        responses = _responses(["a", "b", "c"])
        shot_set = random_shots(responses, 0, seed=0)
        assert shot_set.shot_ids == ()
        assert shot_set.eval_ids == ("a", "b", "c")

    def test_k_at_or_above_corpus_rejected(self):
        responses = _responses(["a", "b", "c"])
        with pytest.raises(ValidationError):
            random_shots(responses, 3, seed=0)

    def test_corpus_175_k_6_leaves_169(self):
        responses = _responses([f"s{i:04d}" for i in range(175)])
        assert len(random_shots(responses, 6, seed=0).eval_ids) == 169
        assert len(random_shots(responses, 4, seed=0).eval_ids) == 171

    @given(
        n=st.integers(min_value=2, max_value=40),
        k=st.integers(min_value=0, max_value=39),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    @settings(max_examples=60)
    def test_partition_property(self, n, k, seed):
        if k >= n:
            k = n - 1
        responses = _responses([f"r{i:02d}" for i in range(n)])
        shot_set = random_shots(responses, k, seed)
        assert len(shot_set.shot_ids) == k
        assert set(shot_set.shot_ids) | set(shot_set.eval_ids) == {r.id for r in responses}
        assert not set(shot_set.shot_ids) & set(shot_set.eval_ids)


class TestEmbedResponses:
    def test_shape_matches_backend_dimension(self, fixture_responses):
        matrix = embed_responses(fixture_responses, TestEmbeddingBackend(384))
        assert matrix.vectors.shape == (len(fixture_responses), 384)
        assert matrix.dimension == 384
        assert matrix.normalized

    def test_single_response_unit_norm(self):
        matrix = embed_responses(_responses(["only"]), TestEmbeddingBackend(16))
        assert np.linalg.norm(matrix.vectors[0]) == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_backend_gives_identical_matrices(self, fixture_responses):
        a = embed_responses(fixture_responses, TestEmbeddingBackend(64))
        b = embed_responses(fixture_responses, TestEmbeddingBackend(64))
        assert np.array_equal(a.vectors, b.vectors)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            embed_responses([], TestEmbeddingBackend(8))

    def test_cache_round_trip(self, fixture_responses):
        matrix = embed_responses(fixture_responses[:5], TestEmbeddingBackend(32))
        reloaded = embedding_cache_from_jsonl(embedding_cache_to_jsonl(matrix))
        assert reloaded.response_ids == matrix.response_ids
        assert np.allclose(reloaded.vectors, matrix.vectors)
        assert reloaded.normalized


class TestShotSetDocument:
    def test_round_trip_with_feedback(self):
        from qagrader.shots import ExemplarFeedback

        shot_set = ShotSet(
            method="clustering",
            k=1,
            seed=3,
            shot_ids=("r1",),
            eval_ids=("r2", "r3"),
            shot_feedback={"r1": {"q1": ExemplarFeedback(grade=1, feedback="covers it")}},
        )
        assert ShotSet.from_dict(shot_set.to_dict()) == shot_set
