"""Prompt assembly, backend-driven grading of the (response x item) grid,
and parsing of outputs into binary grade cells.

Prompts are rendered from a placeholder template so the layout stays a
deterministic, byte-stable function of its inputs. Outputs must declare a
binary score ("score is 1" / "score: 0"); anything else is retried once with
a format reminder and then recorded as a per-cell failure -- never silently
defaulted, which would corrupt agreement statistics downstream.
"""

from __future__ import annotations

import re
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    BackendError,
    BackendUnavailableError,
    ConfigurationError,
    NotFoundError,
    PreconditionError,
    UnparseableOutputError,
    ValidationError,
)
from .gateway import CompletionRecord
from .models import Assignment, StudentResponse
from .questions import EvaluationItem
from .shots import ShotSet

STATUS_PENDING = "pending"
STATUS_RUNNING = "running"
STATUS_COMPLETE = "complete"
STATUS_FAILED = "failed"

FLAG_RELEVANT = "relevant"
FLAG_IRRELEVANT = "irrelevant"
RELEVANCE_FLAGS = (FLAG_RELEVANT, FLAG_IRRELEVANT)

DEFAULT_GENERAL_INSTRUCTION = (
    "You are the instructor of a college-level course and you are grading a "
    "short-answer exam question. Your grading should be based on the evaluation "
    "question asked, the correct answer, the full-credit answer, the student's "
    "answer, and nothing else. Give the binary score 1 or 0, in which 1 means "
    "the student's answer is correct and 0 means the student's answer is "
    "incorrect or does not answer the question. Begin your reply with \"The "
    "student's score is 1.\" or \"The student's score is 0.\" and then justify "
    "your grading."
)

DEFAULT_TEMPLATE_TEXT = (
    "{{general_instruction}}\n"
    "\n"
    "{{question_specific_instruction}}{{shots}}Full-credit answer: {{reference_answer}}\n"
    "\n"
    "Correct answer: {{gold_answer}}\n"
    "\n"
    "Evaluation question: {{question}}\n"
    "\n"
    "Student's answer: {{student_response}}"
)

DEFAULT_SHOT_BLOCK = "Example student's answer: {response}\nScore: {grade}\nFeedback: {feedback}"

FORMAT_REMINDER = (
    'Reminder: begin your reply with "The student\'s score is 1." or '
    '"The student\'s score is 0." and then justify your grading.'
)

_REQUIRED_PLACEHOLDERS = (
    "general_instruction",
    "question_specific_instruction",
    "shots",
    "reference_answer",
    "gold_answer",
    "question",
    "student_response",
)
_PLACEHOLDER = re.compile(r"\{\{(\w+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt layout: a body with {{placeholders}} plus the general
    instruction and the per-shot block format.

    The optional slots (question-specific instruction, shots, gold excerpt)
    render to empty strings when absent; every other slot value appears
    verbatim in the output.
    """

    general_instruction: str = DEFAULT_GENERAL_INSTRUCTION
    body: str = DEFAULT_TEMPLATE_TEXT
    shot_block: str = DEFAULT_SHOT_BLOCK

    def __post_init__(self):
        names = _PLACEHOLDER.findall(self.body)
        for required in _REQUIRED_PLACEHOLDERS:
            if names.count(required) != 1:
                raise ConfigurationError(
                    f"template body must contain {{{{{required}}}}} exactly once"
                )
        extras = set(names) - set(_REQUIRED_PLACEHOLDERS) - {"gold_excerpt"}
        if extras:
            raise ConfigurationError(f"template body has unknown placeholders: {sorted(extras)}")

    @classmethod
    def from_file(cls, path: str | Path, general_instruction: str | None = None) -> "PromptTemplate":
        return cls(
            general_instruction=general_instruction or DEFAULT_GENERAL_INSTRUCTION,
            body=Path(path).read_text(encoding="utf-8"),
        )


def build_prompt(
    template: PromptTemplate,
    item: EvaluationItem,
    shot_set: ShotSet,
    student_response: StudentResponse,
    assignment: Assignment,
    corpus: Mapping[str, StudentResponse] | Sequence[StudentResponse],
) -> str:
    """Render the grading prompt for one (item, response) pair.

    Shots render in shot_ids order as (exemplar response text, human grade,
    human feedback) blocks; the result is byte-identical across calls with
    identical inputs.
    """
    if not item.approved or not item.approved_question:
        raise PreconditionError(f"item {item.item_id} is not approved")
    by_id = corpus if isinstance(corpus, Mapping) else {r.id: r for r in corpus}

    blocks: list[str] = []
    for shot_id in shot_set.shot_ids:
        if shot_id not in by_id:
            raise ValidationError(f"shot {shot_id!r} is not in the corpus")
        feedback = shot_set.shot_feedback.get(shot_id, {}).get(item.item_id)
        if feedback is None:
            raise ConfigurationError(
                f"shot {shot_id!r} has no human feedback for item {item.item_id!r}"
            )
        blocks.append(
            template.shot_block.format(
                response=by_id[shot_id].text, grade=feedback.grade, feedback=feedback.feedback
            )
        )

    instruction = item.question_specific_instruction
    values = {
        "general_instruction": template.general_instruction,
        "question_specific_instruction": (
            f"Question-specific instruction: {instruction}\n\n" if instruction else ""
        ),
        "shots": "".join(block + "\n\n" for block in blocks),
        "reference_answer": assignment.reference_answer,
        "gold_answer": item.gold_answer,
        "question": item.approved_question,
        "student_response": student_response.text,
        "gold_excerpt": item.gold_excerpt,
    }
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], template.body)


_QUOTE_MAP = str.maketrans({"‘": "'", "’": "'", "“": '"', "”": '"'})
_SCORE_PATTERNS = (
    ("score is", re.compile(r"score\s+is\s+([01])\b", re.IGNORECASE)),
    ("score:", re.compile(r"score\s*:\s*([01])\b", re.IGNORECASE)),
)


@dataclass(frozen=True)
class ParsedGrade:
    grade: int
    justification: str
    pattern: str


def parse_grade(raw_text: str) -> ParsedGrade:
    """Extract the first binary score declaration ("score is 0/1" or
    "score: 0/1", case-insensitive, smart quotes normalized).

    The justification is the full raw text. No declaration at all raises
    UnparseableOutputError carrying the raw text.
    """
    if not raw_text:
        raise ValidationError("raw_text must be non-empty")
    normalized = raw_text.translate(_QUOTE_MAP)
    best: tuple[int, str, int] | None = None
    for name, pattern in _SCORE_PATTERNS:
        match = pattern.search(normalized)
        if match and (best is None or match.start() < best[0]):
            best = (match.start(), name, int(match.group(1)))
    if best is None:
        raise UnparseableOutputError("no score declaration found", raw_text=raw_text)
    return ParsedGrade(grade=best[2], justification=raw_text, pattern=best[1])


@dataclass(frozen=True)
class GradeCell:
    """Binary grade + justification for one (response, item) pair."""

    response_id: str
    item_id: str
    grade: int
    justification: str
    relevance_flag: str | None = None
    annotations: tuple[tuple[str, str], ...] = ()
    score_pattern: str = ""
    completion: CompletionRecord | None = None

    def to_dict(self) -> dict:
        return {
            "response_id": self.response_id,
            "item_id": self.item_id,
            "grade": self.grade,
            "justification": self.justification,
            "relevance_flag": self.relevance_flag,
            "annotations": [list(entry) for entry in self.annotations],
            "score_pattern": self.score_pattern,
            "prompt_hash": self.completion.prompt_hash if self.completion else None,
            "backend_id": self.completion.backend_id if self.completion else None,
            "attempt_count": self.completion.attempt_count if self.completion else None,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GradeCell":
        completion = None
        if doc.get("prompt_hash"):
            completion = CompletionRecord(
                prompt_hash=doc["prompt_hash"],
                raw_text=doc.get("justification", ""),
                latency=0.0,
                attempt_count=int(doc.get("attempt_count") or 1),
                backend_id=doc.get("backend_id") or "",
            )
        return cls(
            response_id=str(doc["response_id"]),
            item_id=str(doc["item_id"]),
            grade=int(doc["grade"]),
            justification=str(doc.get("justification", "")),
            relevance_flag=doc.get("relevance_flag"),
            annotations=tuple(
                (str(a), str(b)) for a, b in doc.get("annotations", ())
            ),
            score_pattern=str(doc.get("score_pattern", "")),
            completion=completion,
        )


@dataclass
class GradingRun:
    """State of one grading pass over eval responses x approved items."""

    run_id: str
    assignment_id: str
    shot_set: ShotSet
    backend_id: str
    item_ids: tuple[str, ...]
    status: str = STATUS_PENDING
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    cells: dict[tuple[str, str], GradeCell] = field(default_factory=dict)
    failures: dict[tuple[str, str], str] = field(default_factory=dict)

    @property
    def expected_cells(self) -> list[tuple[str, str]]:
        return [(rid, iid) for rid in self.shot_set.eval_ids for iid in self.item_ids]

    def progress(self) -> dict:
        total = len(self.expected_cells)
        return {
            "total": total,
            "resolved": len(self.cells),
            "failed": len(self.failures),
            "pending": total - len(self.cells),
        }

    def cell(self, response_id: str, item_id: str) -> GradeCell:
        try:
            return self.cells[(response_id, item_id)]
        except KeyError:
            raise NotFoundError(
                f"run {self.run_id} has no cell ({response_id}, {item_id})"
            ) from None

    def to_dict(self) -> dict:
        ordered = sorted(self.cells.values(), key=lambda c: (c.response_id, c.item_id))
        return {
            "run_id": self.run_id,
            "assignment_id": self.assignment_id,
            "shot_set": self.shot_set.to_dict(),
            "backend": self.backend_id,
            "item_ids": list(self.item_ids),
            "status": self.status,
            "created_at": self.created_at,
            "cells": [c.to_dict() for c in ordered],
            "failures": [
                {"response_id": rid, "item_id": iid, "error": err}
                for (rid, iid), err in sorted(self.failures.items())
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GradingRun":
        run = cls(
            run_id=str(doc["run_id"]),
            assignment_id=str(doc["assignment_id"]),
            shot_set=ShotSet.from_dict(doc["shot_set"]),
            backend_id=str(doc.get("backend", "")),
            item_ids=tuple(str(i) for i in doc["item_ids"]),
            status=str(doc.get("status", STATUS_PENDING)),
            created_at=str(doc.get("created_at", "")),
        )
        for cell_doc in doc.get("cells", ()):
            cell = GradeCell.from_dict(cell_doc)
            run.cells[(cell.response_id, cell.item_id)] = cell
        for failure in doc.get("failures", ()):
            run.failures[(str(failure["response_id"]), str(failure["item_id"]))] = str(
                failure["error"]
            )
        return run


def _check_preconditions(run: GradingRun, items: Sequence[EvaluationItem]) -> None:
    pending = [i.item_id for i in items if not i.approved]
    if pending:
        raise PreconditionError(f"items not approved yet: {', '.join(pending)}")
    if run.shot_set.k > 0:
        for shot_id in run.shot_set.shot_ids:
            by_item = run.shot_set.shot_feedback.get(shot_id, {})
            missing = [i.item_id for i in items if i.item_id not in by_item]
            if missing:
                raise ConfigurationError(
                    f"shot {shot_id!r} lacks human feedback for item(s): {', '.join(missing)}"
                )


def grade_one(
    backend,
    template: PromptTemplate,
    item: EvaluationItem,
    shot_set: ShotSet,
    response: StudentResponse,
    assignment: Assignment,
    corpus: Mapping[str, StudentResponse],
) -> GradeCell:
    """Grade a single cell: build the prompt, call the backend, parse; on an
    unparseable output, retry once with a format reminder appended."""
    prompt = build_prompt(template, item, shot_set, response, assignment, corpus)
    record = backend.complete(prompt, item=item, student_text=response.text)
    try:
        parsed = parse_grade(record.raw_text)
    except UnparseableOutputError:
        record = backend.complete(
            prompt + "\n\n" + FORMAT_REMINDER, item=item, student_text=response.text
        )
        parsed = parse_grade(record.raw_text)
    return GradeCell(
        response_id=response.id,
        item_id=item.item_id,
        grade=parsed.grade,
        justification=parsed.justification,
        score_pattern=parsed.pattern,
        completion=record,
    )


def grade_matrix(
    run: GradingRun,
    backend,
    *,
    assignment: Assignment,
    items: Sequence[EvaluationItem],
    corpus: Sequence[StudentResponse],
    template: PromptTemplate | None = None,
    on_cell: Callable[[GradingRun], None] | None = None,
    max_workers: int = 1,
) -> GradingRun:
    """Drive the backend over every unresolved (eval response, item) cell.

    Cells already present on the run are never re-graded, which makes a
    failed run resumable. A backend outage marks the run failed and stops;
    unparseable cells (after the one retry) are recorded as per-cell failures
    and leave the run failed. on_cell is invoked after every resolved cell so
    callers can persist incrementally.
    """
    template = template or PromptTemplate()
    _check_preconditions(run, items)
    items_by_id = {i.item_id: i for i in items}
    corpus_by_id = {r.id: r for r in corpus}
    for rid in run.shot_set.eval_ids:
        if rid not in corpus_by_id:
            raise ValidationError(f"eval response {rid!r} is not in the corpus")

    todo = [key for key in run.expected_cells if key not in run.cells]
    run.status = STATUS_RUNNING
    run.failures = {key: err for key, err in run.failures.items() if key not in run.cells}
    lock = threading.Lock()
    unavailable: list[BackendError] = []

    def work(key: tuple[str, str]) -> None:
        rid, iid = key
        try:
            cell = grade_one(
                backend,
                template,
                items_by_id[iid],
                run.shot_set,
                corpus_by_id[rid],
                assignment,
                corpus_by_id,
            )
        except BackendUnavailableError as exc:
            with lock:
                unavailable.append(exc)
            raise
        except (UnparseableOutputError, BackendError) as exc:
            with lock:
                run.failures[key] = str(exc)
            return
        with lock:
            run.cells[key] = cell
            run.failures.pop(key, None)
            if on_cell is not None:
                on_cell(run)

    if max_workers <= 1:
        for key in todo:
            if unavailable:
                break
            try:
                work(key)
            except BackendUnavailableError:
                break
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(work, key) for key in todo]
            wait(futures, return_when=FIRST_EXCEPTION)
            for future in futures:
                if not future.done():
                    future.cancel()

    if unavailable:
        run.status = STATUS_FAILED
    elif run.failures:
        run.status = STATUS_FAILED
    elif len(run.cells) == len(run.expected_cells):
        run.status = STATUS_COMPLETE
    else:
        run.status = STATUS_FAILED
    if on_cell is not None:
        on_cell(run)
    if unavailable:
        raise unavailable[0]
    return run


def annotate_relevance(
    run: GradingRun, response_id: str, item_id: str, flag: str, annotator_id: str
) -> GradeCell:
    """Attach a human relevance judgment to a graded cell; the annotation
    history keeps every (annotator, flag) event in order."""
    if flag not in RELEVANCE_FLAGS:
        raise ValidationError(f"flag must be one of {RELEVANCE_FLAGS}, got {flag!r}")
    cell = run.cell(response_id, item_id)
    updated = replace(
        cell,
        relevance_flag=flag,
        annotations=cell.annotations + ((annotator_id, flag),),
    )
    run.cells[(response_id, item_id)] = updated
    return updated


def relevance_report(run: GradingRun) -> dict:
    """Counts of annotated / irrelevant cells, e.g. for an irrelevant-rate
    readout like 1/676."""
    annotated = [c for c in run.cells.values() if c.relevance_flag is not None]
    irrelevant = [c for c in annotated if c.relevance_flag == FLAG_IRRELEVANT]
    return {
        "cells": len(run.cells),
        "annotated": len(annotated),
        "irrelevant": len(irrelevant),
        "irrelevant_rate": (len(irrelevant) / len(annotated)) if annotated else 0.0,
    }
