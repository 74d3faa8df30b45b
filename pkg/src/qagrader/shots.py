"""Few-shot exemplar selection.

All student responses are embedded, clustered with seeded k-means, and the
response nearest each centroid becomes a shot; the rest form the evaluation
partition. A seeded random selector exists as the baseline. Everything here
is deterministic given (matrix, k, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BackendError, ValidationError
from .models import StudentResponse

METHOD_CLUSTERING = "clustering"
METHOD_RANDOM = "random"


@dataclass(frozen=True)
class EmbeddingMatrix:
    """One vector per response, rows aligned with response_ids."""

    response_ids: tuple[str, ...]
    vectors: np.ndarray
    normalized: bool

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise ValidationError("vectors must be a 2-D array")
        if len(self.response_ids) != self.vectors.shape[0]:
            raise ValidationError(
                f"{len(self.response_ids)} response ids but {self.vectors.shape[0]} vectors"
            )
        if self.normalized and len(self.response_ids):
            norms = np.linalg.norm(self.vectors, axis=1)
            if not np.allclose(norms, 1.0, atol=1e-9):
                raise ValidationError("normalized matrix has non-unit rows")


@dataclass(frozen=True)
class ExemplarFeedback:
    """Human-written grade + feedback for one (shot, item) pair."""

    grade: int
    feedback: str


@dataclass(frozen=True)
class ShotSet:
    """A shots/evaluation partition of the corpus.

    shot_feedback maps shot_id -> item_id -> ExemplarFeedback; it must be
    populated (by humans) before a few-shot grading run.
    """

    method: str
    k: int
    seed: int
    shot_ids: tuple[str, ...]
    eval_ids: tuple[str, ...]
    shot_feedback: Mapping[str, Mapping[str, ExemplarFeedback]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "seed": self.seed,
            "shot_ids": list(self.shot_ids),
            "eval_ids": list(self.eval_ids),
            "shot_feedback": {
                sid: {
                    iid: {"grade": fb.grade, "feedback": fb.feedback}
                    for iid, fb in by_item.items()
                }
                for sid, by_item in self.shot_feedback.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ShotSet":
        return cls(
            method=str(doc["method"]),
            k=int(doc["k"]),
            seed=int(doc["seed"]),
            shot_ids=tuple(str(s) for s in doc["shot_ids"]),
            eval_ids=tuple(str(s) for s in doc["eval_ids"]),
            shot_feedback={
                str(sid): {
                    str(iid): ExemplarFeedback(grade=int(fb["grade"]), feedback=str(fb["feedback"]))
                    for iid, fb in by_item.items()
                }
                for sid, by_item in doc.get("shot_feedback", {}).items()
            },
        )

    def with_feedback(
        self, feedback: Mapping[str, Mapping[str, ExemplarFeedback]]
    ) -> "ShotSet":
        """Attach feedback for the selected shots from a corpus-level map."""
        picked = {sid: dict(feedback[sid]) for sid in self.shot_ids if sid in feedback}
        return ShotSet(
            method=self.method,
            k=self.k,
            seed=self.seed,
            shot_ids=self.shot_ids,
            eval_ids=self.eval_ids,
            shot_feedback=picked,
        )


def feedback_map_from_document(doc: Mapping) -> dict[str, dict[str, ExemplarFeedback]]:
    """Parse a corpus-level feedback document:
    {response_id: {item_id: {grade, feedback}}}."""
    out: dict[str, dict[str, ExemplarFeedback]] = {}
    for rid, by_item in doc.items():
        out[str(rid)] = {
            str(iid): ExemplarFeedback(grade=int(fb["grade"]), feedback=str(fb["feedback"]))
            for iid, fb in by_item.items()
        }
    return out


def embed_responses(responses: Sequence[StudentResponse], backend) -> EmbeddingMatrix:
    """Embed every response (order preserved) and L2-normalize the rows."""
    if not responses:
        raise ValidationError("cannot embed an empty response list")
    raw = backend.embed([r.text for r in responses])
    vectors = np.asarray(raw, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] != len(responses):
        raise BackendError(
            f"embedding backend returned shape {vectors.shape} for {len(responses)} texts"
        )
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise BackendError("embedding backend returned a zero vector")
    return EmbeddingMatrix(
        response_ids=tuple(r.id for r in responses),
        vectors=vectors / norms,
        normalized=True,
    )


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple[float, ...]


def _plus_plus_init(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = vectors.shape[0]
    centroids = np.empty((k, vectors.shape[1]), dtype=float)
    first = int(rng.integers(n))
    centroids[0] = vectors[first]
    closest_sq = np.sum((vectors - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(closest_sq.sum())
        if total > 0:
            probabilities = closest_sq / total
            choice = int(rng.choice(n, p=probabilities))
        else:
            choice = int(rng.integers(n))
        centroids[j] = vectors[choice]
        closest_sq = np.minimum(closest_sq, np.sum((vectors - centroids[j]) ** 2, axis=1))
    return centroids


def kmeans(
    matrix: EmbeddingMatrix | np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> KMeansResult:
    """Lloyd's algorithm with seeded k-means++ initialization.

    Deterministic given (matrix, k, seed, max_iter, tol). An emptied cluster
    is re-seeded with the point farthest from its assigned centroid. Stops
    when every centroid moves less than tol, or at max_iter.
    """
    vectors = matrix.vectors if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix, float)
    n = vectors.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    if tol < 0:
        raise ValidationError(f"tol must be >= 0, got {tol}")

    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(vectors, k, rng)
    assignments = np.zeros(n, dtype=int)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        distances_sq = np.sum((vectors[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        assignments = np.argmin(distances_sq, axis=1)
        point_d2 = distances_sq[np.arange(n), assignments]
        history.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        empties = []
        for j in range(k):
            members = vectors[assignments == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
            else:
                empties.append(j)
        if empties:
            order = np.argsort(-point_d2, kind="stable")
            used = 0
            for j in empties:
                new_centroids[j] = vectors[order[used]]
                used += 1
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break

    distances_sq = np.sum((vectors[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    assignments = np.argmin(distances_sq, axis=1)
    inertia = float(distances_sq[np.arange(n), assignments].sum())
    return KMeansResult(
        centroids=centroids,
        assignments=assignments,
        inertia=inertia,
        n_iter=n_iter,
        inertia_history=tuple(history),
    )


def select_shots(
    responses: Sequence[StudentResponse],
    matrix: EmbeddingMatrix,
    k: int,
    seed: int,
    *,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ShotSet:
    """Cluster the corpus into k groups and pick the response nearest each
    centroid (distance ties break to the lexicographically smallest id; a
    response already chosen is skipped for the next-nearest)."""
    ids = [r.id for r in responses]
    if tuple(ids) != tuple(matrix.response_ids):
        raise ValidationError("responses and embedding matrix are not aligned")
    if k >= len(responses):
        raise ValidationError(
            f"k must leave a non-empty evaluation set: k={k}, corpus={len(responses)}"
        )
    result = kmeans(matrix, k, seed, max_iter=max_iter, tol=tol)
    chosen: list[str] = []
    taken: set[str] = set()
    for j in range(k):
        distances = np.linalg.norm(matrix.vectors - result.centroids[j], axis=1)
        ranked = sorted(zip(distances.tolist(), ids))
        for _, rid in ranked:
            if rid not in taken:
                chosen.append(rid)
                taken.add(rid)
                break
    eval_ids = tuple(rid for rid in ids if rid not in taken)
    return ShotSet(
        method=METHOD_CLUSTERING,
        k=k,
        seed=seed,
        shot_ids=tuple(chosen),
        eval_ids=eval_ids,
    )


def random_shots(responses: Sequence[StudentResponse], k: int, seed: int) -> ShotSet:
    """Draw k shots without replacement from a seeded generator. k=0 is
    permitted for zero-shot runs."""
    ids = [r.id for r in responses]
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    if k >= len(responses) and k != 0:
        raise ValidationError(
            f"k must leave a non-empty evaluation set: k={k}, corpus={len(responses)}"
        )
    rng = np.random.default_rng(seed)
    picked = sorted(rng.choice(len(ids), size=k, replace=False).tolist()) if k else []
    taken = {ids[i] for i in picked}
    return ShotSet(
        method=METHOD_RANDOM,
        k=k,
        seed=seed,
        shot_ids=tuple(ids[i] for i in picked),
        eval_ids=tuple(rid for rid in ids if rid not in taken),
    )


def embedding_cache_to_jsonl(matrix: EmbeddingMatrix) -> str:
    lines = [
        json.dumps({"response_id": rid, "vector": vector.tolist()})
        for rid, vector in zip(matrix.response_ids, matrix.vectors)
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def embedding_cache_from_jsonl(text: str) -> EmbeddingMatrix:
    ids: list[str] = []
    rows: list[list[float]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        ids.append(str(row["response_id"]))
        rows.append([float(x) for x in row["vector"]])
    vectors = np.asarray(rows, dtype=float)
    norms = np.linalg.norm(vectors, axis=1)
    normalized = bool(np.allclose(norms, 1.0, atol=1e-9)) if len(rows) else True
    return EmbeddingMatrix(response_ids=tuple(ids), vectors=vectors, normalized=normalized)
