"""Turn a reference answer + rubric into evaluation question/answer items.

Each rubric point becomes the conditioned target answer of one evaluation
item: candidate questions come from a pluggable backend (a live model, a
scripted fixture, or manual entry), the gold answer is the rubric point text,
and a gold excerpt is cut from the reference answer around the target phrase.
Items start pending and are approved one question at a time by an instructor.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .errors import BackendError, ConflictError, ValidationError
from .models import Assignment, OracleRules

STATUS_PENDING = "pending"
STATUS_APPROVED = "approved"

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_TOKEN = re.compile(r"[a-z0-9]+")


def split_sentences(text: str) -> list[str]:
    """Split on '.', '!', '?' followed by whitespace or end of text.

    Abbreviations are not special-cased; reference answers are short,
    controlled instructor text.
    """
    parts = [s.strip() for s in _SENTENCE_END.split(text)]
    return [s for s in parts if s]


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    spans: list[tuple[int, int]] = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        spans.append((start, match.start()))
        start = match.end()
    if start < len(text):
        spans.append((start, len(text)))
    return [(a, b) for a, b in spans if text[a:b].strip()]


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens; punctuation (including '/') splits."""
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class ExcerptMatch:
    """Excerpt text plus whether the target phrase was actually located."""

    text: str
    matched: bool


@dataclass(frozen=True)
class EvaluationItem:
    """One rubric point's evaluation question/answer pair.

    The gold answer is the rubric point text (its conditioned target answer);
    item_id equals rubric_point_id since the mapping is one-to-one.
    """

    item_id: str
    rubric_point_id: str
    gold_answer: str
    gold_excerpt: str
    excerpt_matched: bool = True
    candidates: tuple[str, ...] = ()
    approved_question: str | None = None
    question_specific_instruction: str | None = None
    status: str = STATUS_PENDING
    version: int = 0
    degraded_candidates: bool = False
    oracle_rules: OracleRules | None = None

    @property
    def approved(self) -> bool:
        return self.status == STATUS_APPROVED

    def to_dict(self) -> dict:
        doc: dict = {
            "item_id": self.item_id,
            "rubric_point_id": self.rubric_point_id,
            "candidates": list(self.candidates),
            "approved_question": self.approved_question,
            "gold_answer": self.gold_answer,
            "gold_excerpt": self.gold_excerpt,
            "excerpt_matched": self.excerpt_matched,
            "question_specific_instruction": self.question_specific_instruction,
            "status": self.status,
            "version": self.version,
        }
        if self.degraded_candidates:
            doc["degraded_candidates"] = True
        if self.oracle_rules is not None:
            doc["oracle_rules"] = self.oracle_rules.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EvaluationItem":
        rules = doc.get("oracle_rules")
        return cls(
            item_id=str(doc["item_id"]),
            rubric_point_id=str(doc["rubric_point_id"]),
            gold_answer=str(doc["gold_answer"]),
            gold_excerpt=str(doc.get("gold_excerpt", "")),
            excerpt_matched=bool(doc.get("excerpt_matched", True)),
            candidates=tuple(str(c) for c in doc.get("candidates", ())),
            approved_question=doc.get("approved_question"),
            question_specific_instruction=doc.get("question_specific_instruction"),
            status=str(doc.get("status", STATUS_PENDING)),
            version=int(doc.get("version", 0)),
            degraded_candidates=bool(doc.get("degraded_candidates", False)),
            oracle_rules=OracleRules.from_dict(rules) if rules else None,
        )


class QuestionBackend(Protocol):
    """Anything that can propose evaluation questions for a target answer."""

    def generate(
        self,
        reference_answer: str,
        conditioned_answer: str,
        k: int,
        *,
        rubric_point_id: str | None = None,
    ) -> Sequence[str]: ...


class ScriptedQuestionBackend:
    """Replays fixed candidate questions keyed by rubric point id (falling
    back to the conditioned answer text). Used for tests and fixtures."""

    def __init__(self, questions: Mapping[str, Sequence[str]]):
        self.questions = {k: list(v) for k, v in questions.items()}

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedQuestionBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValidationError("question script: expected an object keyed by rubric point id")
        return cls(data)

    def generate(self, reference_answer, conditioned_answer, k, *, rubric_point_id=None):
        key = rubric_point_id if rubric_point_id in self.questions else conditioned_answer
        if key not in self.questions:
            raise BackendError(f"question script has no entry for {rubric_point_id or conditioned_answer!r}")
        return self.questions[key][:k]


class ManualQuestionBackend:
    """Passes through instructor-typed questions; the pipeline must not
    hard-require a model."""

    def __init__(self, entries: Sequence[str]):
        self.entries = list(entries)

    def generate(self, reference_answer, conditioned_answer, k, *, rubric_point_id=None):
        return self.entries[:k]


def mark_target_answers(assignment: Assignment) -> list[tuple[str, str]]:
    """One (rubric_point_id, conditioned_answer) pair per rubric point, in
    rubric order."""
    return [(p.id, p.text) for p in assignment.rubric]


def generate_candidate_questions(
    reference_answer: str,
    conditioned_answer: str,
    k: int,
    backend: QuestionBackend,
    *,
    rubric_point_id: str | None = None,
) -> tuple[list[str], bool]:
    """Ask the backend for k candidate questions answerable by the
    conditioned answer.

    Returns (candidates, degraded): duplicates and empty strings are dropped,
    and degraded is True when fewer than k distinct candidates survive. Zero
    usable candidates is a backend error (retryable).
    """
    if k < 1:
        raise ValidationError(f"candidate count k must be >= 1, got {k}")
    try:
        raw = backend.generate(
            reference_answer, conditioned_answer, k, rubric_point_id=rubric_point_id
        )
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(f"question generation failed: {exc}") from exc
    candidates: list[str] = []
    for text in raw:
        text = str(text).strip()
        if text and text not in candidates:
            candidates.append(text)
    candidates = candidates[:k]
    if not candidates:
        raise BackendError("question generation returned no usable candidates")
    return candidates, len(candidates) < k


def extract_gold_excerpt(reference_answer: str, conditioned_answer: str) -> ExcerptMatch:
    """Cut the minimal contiguous sentence run of the reference answer that
    contains the conditioned answer phrase.

    Match rule: case-insensitive substring first; otherwise the single
    sentence with the highest token overlap (ties -> earliest). Only when
    overlap is zero everywhere is the whole reference returned, flagged
    unmatched.
    """
    if not reference_answer.strip():
        raise ValidationError("reference_answer: must be non-empty")
    spans = _sentence_spans(reference_answer)
    sentences = [reference_answer[a:b].strip() for a, b in spans]

    phrase = conditioned_answer.strip()
    if phrase:
        hit = re.search(re.escape(phrase), reference_answer, re.IGNORECASE)
        if hit:
            first = last = None
            for i, (a, b) in enumerate(spans):
                if a < hit.end() and b > hit.start():
                    if first is None:
                        first = i
                    last = i
            if first is not None:
                return ExcerptMatch(" ".join(sentences[first : last + 1]), True)

    phrase_tokens = set(tokenize(conditioned_answer))
    best_index, best_overlap = None, 0
    for i, sentence in enumerate(sentences):
        overlap = len(phrase_tokens & set(tokenize(sentence)))
        if overlap > best_overlap:
            best_index, best_overlap = i, overlap
    if best_index is not None:
        return ExcerptMatch(sentences[best_index], True)
    return ExcerptMatch(reference_answer.strip(), False)


def approve_question(
    item: EvaluationItem,
    chosen_text: str,
    instruction: str | None = None,
    *,
    revise: bool = False,
) -> EvaluationItem:
    """Approve one question for the item (a candidate or instructor-edited
    text), optionally attaching a question-specific instruction.

    Re-approving an approved item requires revise=True; the version counter
    increments on every approval for optimistic concurrency.
    """
    chosen = chosen_text.strip()
    if not chosen:
        raise ValidationError("chosen_text: must be non-empty")
    if item.approved and not revise:
        raise ConflictError(
            f"item {item.item_id} is already approved; pass revise=True to change it"
        )
    return replace(
        item,
        approved_question=chosen,
        question_specific_instruction=(
            instruction if instruction is not None else item.question_specific_instruction
        ),
        status=STATUS_APPROVED,
        version=item.version + 1,
    )


def build_evaluation_items(
    assignment: Assignment, backend: QuestionBackend, k: int = 3
) -> list[EvaluationItem]:
    """Create one pending item per rubric point: k candidate questions, the
    gold answer, and the gold excerpt. Oracle rules on a rubric point are
    carried onto its item."""
    items: list[EvaluationItem] = []
    for point_id, answer in mark_target_answers(assignment):
        point = assignment.point(point_id)
        candidates, degraded = generate_candidate_questions(
            assignment.reference_answer, answer, k, backend, rubric_point_id=point_id
        )
        excerpt = extract_gold_excerpt(assignment.reference_answer, answer)
        items.append(
            EvaluationItem(
                item_id=point_id,
                rubric_point_id=point_id,
                gold_answer=answer,
                gold_excerpt=excerpt.text,
                excerpt_matched=excerpt.matched,
                candidates=tuple(candidates),
                degraded_candidates=degraded,
                oracle_rules=point.oracle_rules,
            )
        )
    return items


def items_to_document(assignment_id: str, items: Sequence[EvaluationItem]) -> dict:
    return {"assignment_id": assignment_id, "items": [item.to_dict() for item in items]}


def items_from_document(doc: Mapping) -> tuple[str, list[EvaluationItem]]:
    return str(doc["assignment_id"]), [EvaluationItem.from_dict(d) for d in doc["items"]]
