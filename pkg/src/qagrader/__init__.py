"""Rubric-driven short-answer grading pipeline.

An instructor's reference answer + rubric become structured evaluation
question/answer items; a pluggable backend grades each student response per
item; weighted scores and unified feedback are consolidated per response; and
agreement against human labels is measured with Cohen's kappa.
"""

__version__ = "0.1.0"

from .agreement import cohen_kappa, raw_agreement, reconcile
from .grading import GradingRun, PromptTemplate, build_prompt, grade_matrix, parse_grade
from .models import Assignment, LabelSet, RubricPoint, StudentResponse, load_assignment
from .questions import EvaluationItem, approve_question, build_evaluation_items
from .scoring import ScoreReport, consolidate, score_run
from .shots import ShotSet, embed_responses, kmeans, random_shots, select_shots
from .workspace import Workspace

__all__ = [
    "Assignment",
    "EvaluationItem",
    "GradingRun",
    "LabelSet",
    "PromptTemplate",
    "RubricPoint",
    "ScoreReport",
    "ShotSet",
    "StudentResponse",
    "Workspace",
    "approve_question",
    "build_evaluation_items",
    "build_prompt",
    "cohen_kappa",
    "consolidate",
    "embed_responses",
    "grade_matrix",
    "kmeans",
    "load_assignment",
    "parse_grade",
    "raw_agreement",
    "random_shots",
    "reconcile",
    "score_run",
    "select_shots",
]
