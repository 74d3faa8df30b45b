"""Regenerate the committed golden prompt files.

Renders the grading prompts for fixture response r01 -- zero-shot and 4-shot
(clustering, seed 0) -- across all four items, exactly as the pipeline builds
them after the fixture's scripted question generation and approvals. Run
after any deliberate template or fixture change:  python3 tools/make_goldens.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qagrader import fixture as fixture_pkg
from qagrader.gateway import TestEmbeddingBackend
from qagrader.grading import PromptTemplate, build_prompt
from qagrader.models import load_assignment, load_responses
from qagrader.questions import ScriptedQuestionBackend, approve_question, build_evaluation_items
from qagrader.shots import ShotSet, embed_responses, feedback_map_from_document, select_shots

GOLDEN_DIR = Path(__file__).resolve().parents[1] / "tests" / "golden"
GOLDEN_SHOT_SEED = 0


def approved_fixture_items():
    assignment = load_assignment(fixture_pkg.ASSIGNMENT)
    backend = ScriptedQuestionBackend.from_file(fixture_pkg.QUESTIONS)
    items = build_evaluation_items(assignment, backend, k=3)
    approved = []
    for item in items:
        instruction = fixture_pkg.P1_INSTRUCTION if item.item_id == "p1" else None
        approved.append(
            approve_question(item, item.candidates[fixture_pkg.APPROVALS[item.item_id]], instruction)
        )
    return assignment, approved


def golden_shot_set(responses) -> ShotSet:
    matrix = embed_responses(responses, TestEmbeddingBackend(64))
    shot_set = select_shots(responses, matrix, 4, GOLDEN_SHOT_SEED)
    feedback = feedback_map_from_document(
        json.loads(fixture_pkg.FEEDBACK.read_text(encoding="utf-8"))
    )
    return shot_set.with_feedback(feedback)


def main() -> None:
    assignment, items = approved_fixture_items()
    responses, _ = load_responses(fixture_pkg.RESPONSES)
    corpus = {r.id: r for r in responses}
    target = corpus["r01"]

    zero = ShotSet(method="random", k=0, seed=0, shot_ids=(), eval_ids=tuple(corpus))
    four = golden_shot_set(responses)
    assert "r01" not in four.shot_ids, "pick a seed that leaves r01 in the eval set"

    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    template = PromptTemplate()
    for label, shot_set in (("0shot", zero), ("4shot", four)):
        for item in items:
            prompt = build_prompt(template, item, shot_set, target, assignment, corpus)
            path = GOLDEN_DIR / f"prompt_r01_{item.item_id}_{label}.txt"
            path.write_bytes(prompt.encode("utf-8"))
            print(f"wrote {path} ({len(prompt)} chars)")


if __name__ == "__main__":
    main()
