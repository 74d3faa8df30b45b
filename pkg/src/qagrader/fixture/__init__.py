"""Bundled synthetic corpus: one assignment with a 4-point rubric, 40
responses with planted per-item labels, matching oracle keyword rules,
scripted candidate questions, and exemplar feedback for every response.

The planted labels are, by construction, exactly what the oracle backend
grades, so end-to-end runs against this corpus must reach kappa 1.0.
"""

from pathlib import Path

_HERE = Path(__file__).parent

ASSIGNMENT = _HERE / "assignment.json"
RESPONSES = _HERE / "responses.jsonl"
GROUND_TRUTH_LABELS = _HERE / "labels.jsonl"
GRADER_A_LABELS = _HERE / "grader_a.jsonl"
GRADER_B_LABELS = _HERE / "grader_b.jsonl"
QUESTIONS = _HERE / "questions.json"
FEEDBACK = _HERE / "feedback.json"

ASSIGNMENT_ID = "solubility-exam-1"
APPROVALS = {"p1": 0, "p2": 0, "p3": 1, "p4": 0}  # approved candidate index per item
P1_INSTRUCTION = (
    "Mentioning either charge separation or unequal sharing of electrons counts as correct."
)


def path(name: str) -> Path:
    return _HERE / name
