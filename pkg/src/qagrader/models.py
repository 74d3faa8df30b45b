"""Domain types and ingestion for assignments, student responses, and labels.

Documents are UTF-8 JSON / JSONL (responses alternatively CSV with header
``id,text``). Loaded values are immutable; ingestion validates eagerly and
raises :class:`IngestError` / :class:`ValidationError` naming the offending
field.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .errors import IngestError, ValidationError

logger = logging.getLogger(__name__)

ROLE_GRADER = "grader"
ROLE_GROUND_TRUTH = "ground_truth"
ROLES = (ROLE_GRADER, ROLE_GROUND_TRUTH)


def parse_weight(value: int | float | str, *, field_name: str = "weight") -> Fraction:
    """Parse a rubric weight into an exact non-negative Fraction.

    Accepts ints, floats (read via their decimal repr, so 0.1 -> 1/10),
    and strings like "3", "0.5", or "1/3".
    """
    try:
        if isinstance(value, bool):
            raise ValidationError(f"{field_name}: must be a number, got a bool")
        if isinstance(value, int):
            weight = Fraction(value)
        elif isinstance(value, float):
            weight = Fraction(Decimal(str(value)))
        elif isinstance(value, str):
            weight = Fraction(value)
        else:
            raise ValidationError(f"{field_name}: must be a number, got {type(value).__name__}")
    except (ValueError, InvalidOperation, ZeroDivisionError) as exc:
        raise ValidationError(f"{field_name}: not a valid rational: {value!r}") from exc
    if weight < 0:
        raise ValidationError(f"{field_name}: must be non-negative, got {value!r}")
    return weight


def weight_to_json(weight: Fraction) -> int | float | str:
    """Serialize a weight losslessly: int when integral, float when the value
    has an exact decimal form, otherwise an "n/d" string."""
    if weight.denominator == 1:
        return int(weight)
    as_float = float(weight)
    if Fraction(Decimal(str(as_float))) == weight:
        return as_float
    return f"{weight.numerator}/{weight.denominator}"


@dataclass(frozen=True)
class OracleRules:
    """Keyword rules for the deterministic oracle grader: any accept phrase
    present and no reject phrase present scores 1."""

    accept: tuple[str, ...]
    reject: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"accept": list(self.accept), "reject": list(self.reject)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "OracleRules":
        return cls(
            accept=tuple(str(p) for p in data.get("accept", ())),
            reject=tuple(str(p) for p in data.get("reject", ())),
        )


@dataclass(frozen=True)
class RubricPoint:
    """One weighted knowledge point; its text doubles as the target answer."""

    id: str
    text: str
    weight: Fraction
    oracle_rules: OracleRules | None = None

    def to_dict(self) -> dict:
        doc: dict = {"id": self.id, "text": self.text, "weight": weight_to_json(self.weight)}
        if self.oracle_rules is not None:
            doc["oracle_rules"] = self.oracle_rules.to_dict()
        return doc


@dataclass(frozen=True)
class Assignment:
    """A gradable problem: prompt text, full-credit reference answer, and an
    ordered weighted rubric."""

    id: str
    problem_text: str
    reference_answer: str
    rubric: tuple[RubricPoint, ...]

    @property
    def max_score(self) -> Fraction:
        return sum((p.weight for p in self.rubric), Fraction(0))

    def point(self, point_id: str) -> RubricPoint:
        for p in self.rubric:
            if p.id == point_id:
                return p
        raise ValidationError(f"rubric: unknown point id {point_id!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "problem_text": self.problem_text,
            "reference_answer": self.reference_answer,
            "rubric": [p.to_dict() for p in self.rubric],
            "max_score": weight_to_json(self.max_score),
        }


@dataclass(frozen=True)
class StudentResponse:
    """A de-identified free-text answer; ids are opaque strings."""

    id: str
    text: str


@dataclass(frozen=True)
class LabelSet:
    """One grader's binary labels over (response_id, item_id) cells.

    Grids may be partial; completeness is checked only where agreement is
    computed.
    """

    grader_id: str
    role: str
    cells: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def label(self, response_id: str, item_id: str) -> int | None:
        return self.cells.get((response_id, item_id))

    def unlabeled(self, response_ids: Iterable[str], item_ids: Iterable[str]) -> list[tuple[str, str]]:
        """Cells of the full grid this set does not cover."""
        items = list(item_ids)
        return [
            (rid, iid)
            for rid in response_ids
            for iid in items
            if (rid, iid) not in self.cells
        ]

    def to_rows(self) -> list[dict]:
        rows = [
            {
                "grader_id": self.grader_id,
                "response_id": rid,
                "item_id": iid,
                "label": label,
                "role": self.role,
            }
            for (rid, iid), label in self.cells.items()
        ]
        rows.sort(key=lambda r: (r["response_id"], r["item_id"]))
        return rows


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise IngestError(message)


def _read_document(source: str | Path | dict) -> dict:
    if isinstance(source, dict):
        return source
    path = Path(source)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise IngestError(f"{path}: expected a JSON object at top level")
    return doc


def rubric_point_from_dict(data: Mapping, *, index: int) -> RubricPoint:
    where = f"rubric[{index}]"
    _require(isinstance(data, Mapping), f"{where}: expected an object")
    _require("id" in data, f"{where}.id: missing")
    _require("text" in data, f"{where}.text: missing")
    _require("weight" in data, f"{where}.weight: missing")
    point_id = str(data["id"])
    text = str(data["text"])
    if not text.strip():
        raise ValidationError(f"{where}.text: must be non-empty")
    weight = parse_weight(data["weight"], field_name=f"{where}.weight")
    rules = None
    if data.get("oracle_rules") is not None:
        rules = OracleRules.from_dict(data["oracle_rules"])
    return RubricPoint(id=point_id, text=text, weight=weight, oracle_rules=rules)


def load_assignment(source: str | Path | dict) -> Assignment:
    """Load and validate an assignment document.

    Raises IngestError/ValidationError naming the offending field; rubric
    order is preserved and max_score is the exact sum of weights.
    """
    doc = _read_document(source)
    for key in ("id", "problem_text", "reference_answer", "rubric"):
        _require(key in doc, f"{key}: missing")
    rubric_raw = doc["rubric"]
    _require(isinstance(rubric_raw, list), "rubric: expected a list")
    if not rubric_raw:
        raise ValidationError("rubric: must be non-empty")
    points = tuple(rubric_point_from_dict(p, index=i) for i, p in enumerate(rubric_raw))
    seen: set[str] = set()
    for i, p in enumerate(points):
        if p.id in seen:
            raise ValidationError(f"rubric[{i}].id: duplicate id {p.id!r}")
        seen.add(p.id)
    assignment = Assignment(
        id=str(doc["id"]),
        problem_text=str(doc["problem_text"]),
        reference_answer=str(doc["reference_answer"]),
        rubric=points,
    )
    if "max_score" in doc:
        declared = parse_weight(doc["max_score"], field_name="max_score")
        if declared != assignment.max_score:
            raise ValidationError(
                f"max_score: declared {declared} does not equal rubric sum {assignment.max_score}"
            )
    return assignment


def _iter_response_rows(source: str | Path) -> Iterable[dict]:
    path = Path(source)
    raw = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        reader = csv.DictReader(io.StringIO(raw))
        fields = reader.fieldnames or []
        _require("id" in fields and "text" in fields, f"{path}: CSV header must contain id,text")
        yield from reader
        return
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        _require(isinstance(row, dict), f"{path}:{lineno}: expected an object")
        yield row


def load_responses(source: str | Path) -> tuple[list[StudentResponse], int]:
    """Load a response corpus (JSONL of {id, text}, or CSV with header id,text).

    Returns (responses sorted by id, dropped_count) where dropped_count is the
    number of rows rejected for whitespace-only text.
    """
    responses: list[StudentResponse] = []
    seen: set[str] = set()
    dropped = 0
    for row in _iter_response_rows(source):
        _require("id" in row and row["id"] is not None, "response row: id missing")
        _require("text" in row and row["text"] is not None, "response row: text missing")
        rid = str(row["id"])
        if rid in seen:
            raise IngestError(f"response id: duplicate id {rid!r}")
        seen.add(rid)
        text = str(row["text"])
        if not text.strip():
            dropped += 1
            continue
        responses.append(StudentResponse(id=rid, text=text))
    if dropped:
        logger.warning("dropped %d empty response row(s)", dropped)
    responses.sort(key=lambda r: r.id)
    return responses, dropped


def responses_to_jsonl(responses: Iterable[StudentResponse]) -> str:
    lines = [json.dumps({"id": r.id, "text": r.text}, ensure_ascii=False) for r in responses]
    return "\n".join(lines) + ("\n" if lines else "")


def _id_set(values: Iterable) -> set[str]:
    ids: set[str] = set()
    for value in values:
        if isinstance(value, str):
            ids.add(value)
        elif hasattr(value, "item_id"):
            ids.add(value.item_id)
        elif hasattr(value, "id"):
            ids.add(value.id)
        else:
            raise ValidationError(f"cannot derive an id from {value!r}")
    return ids


def _iter_label_rows(source: str | Path | list) -> Iterable[tuple[str, dict]]:
    if isinstance(source, list):
        for i, row in enumerate(source):
            yield f"row {i}", row
        return
    path = Path(source)
    raw = path.read_text(encoding="utf-8")
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        yield f"{path}:{lineno}", row


def load_label_sets(
    source: str | Path | list, responses: Iterable, items: Iterable
) -> list[LabelSet]:
    """Load a label document (JSONL of {grader_id, response_id, item_id, label,
    role}), grouped into one LabelSet per (grader_id, role) in order of first
    appearance. Validates the 0/1 domain and referential integrity."""
    response_ids = _id_set(responses)
    item_ids = _id_set(items)
    grouped: dict[tuple[str, str], dict[tuple[str, str], int]] = {}
    for where, row in _iter_label_rows(source):
        _require(isinstance(row, dict), f"{where}: expected an object")
        for key in ("grader_id", "response_id", "item_id", "label", "role"):
            _require(key in row, f"{where}: {key} missing")
        label = row["label"]
        if isinstance(label, bool) or label not in (0, 1):
            raise ValidationError(f"{where}: label must be 0 or 1, got {label!r}")
        role = str(row["role"])
        if role not in ROLES:
            raise ValidationError(f"{where}: role must be one of {ROLES}, got {role!r}")
        rid = str(row["response_id"])
        iid = str(row["item_id"])
        if rid not in response_ids:
            raise ValidationError(f"{where}: unknown response_id {rid!r}")
        if iid not in item_ids:
            raise ValidationError(f"{where}: unknown item_id {iid!r}")
        cells = grouped.setdefault((str(row["grader_id"]), role), {})
        cells[(rid, iid)] = int(label)
    return [
        LabelSet(grader_id=grader_id, role=role, cells=cells)
        for (grader_id, role), cells in grouped.items()
    ]


def load_labels(
    source: str | Path | list,
    responses: Iterable,
    items: Iterable,
    *,
    grader_id: str | None = None,
) -> LabelSet:
    """Load a single grader's LabelSet.

    If grader_id is given, other graders' rows are ignored; otherwise the
    document must be homogeneous (exactly one grader/role).
    """
    sets = load_label_sets(source, responses, items)
    if grader_id is not None:
        sets = [s for s in sets if s.grader_id == grader_id]
    if not sets:
        raise IngestError(f"label document: no rows{f' for grader {grader_id!r}' if grader_id else ''}")
    if len(sets) > 1:
        names = sorted({s.grader_id for s in sets})
        raise IngestError(
            f"label document: multiple graders {names}; pass grader_id or use load_label_sets"
        )
    return sets[0]


def label_set_to_jsonl(label_set: LabelSet) -> str:
    lines = [json.dumps(row, ensure_ascii=False) for row in label_set.to_rows()]
    return "\n".join(lines) + ("\n" if lines else "")
