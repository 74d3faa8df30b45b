"""Regenerate the bundled synthetic fixture corpus.

Builds 40 student responses from per-point hit/miss sentence pools, computes
the planted labels by applying the oracle keyword rules to each text (so the
oracle backend reproduces them exactly), and checks every structural
constraint the prompt tests rely on:

  * no response text is a substring of another;
  * no gold answer (rubric point text) occurs verbatim in the reference
    answer, any candidate question, any response, any feedback text, the
    instruction texts, or the default template scaffolding;
  * no approved question occurs in any other prompt slot value;
  * the gold-excerpt extractor picks the intended reference sentence for
    every rubric point.

Run from the repo root:  python3 tools/make_fixture.py
"""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from qagrader.fixture import APPROVALS, P1_INSTRUCTION
from qagrader.gateway import oracle_grade
from qagrader.grading import DEFAULT_GENERAL_INSTRUCTION
from qagrader.models import OracleRules, load_assignment
from qagrader.questions import EvaluationItem, extract_gold_excerpt

OUT = Path(__file__).resolve().parents[1] / "src" / "qagrader" / "fixture"

ASSIGNMENT = {
    "id": "solubility-exam-1",
    "problem_text": (
        "Part (b): Briefly explain why table salt dissolves readily in water "
        "while cooking oil does not."
    ),
    "reference_answer": (
        "Water molecules are polar, with a charged oxygen end and a charged hydrogen end. "
        "Salt is an ionic compound, so its ions are pulled apart by the charged ends of water. "
        "The separated ions end up surrounded by shells of water molecules. "
        "Oil is nonpolar and offers no charged regions for water to grab, so it stays separate."
    ),
    "rubric": [
        {
            "id": "p1",
            "text": "water acts as a polar solvent",
            "weight": 1,
            "oracle_rules": {
                "accept": ["water is polar", "polar molecule", "charged ends"],
                "reject": [],
            },
        },
        {
            "id": "p2",
            "text": "ionic bonding in salt",
            "weight": 1,
            "oracle_rules": {
                "accept": ["ionic", "ions are pulled", "electrostatic"],
                "reject": [],
            },
        },
        {
            "id": "p3",
            "text": "shells of water around ions",
            "weight": 1,
            "oracle_rules": {
                "accept": ["surrounded by water", "hydration", "water cage"],
                "reject": [],
            },
        },
        {
            "id": "p4",
            "text": "oil lacks charge",
            "weight": 1,
            "oracle_rules": {
                "accept": ["nonpolar", "no charged regions", "uncharged"],
                "reject": ["everything is polar"],
            },
        },
    ],
}

QUESTIONS = {
    "p1": [
        "What kind of molecule is water with respect to charge?",
        "Why do water molecules attract charged particles?",
        "What property of water lets it pull apart other substances?",
    ],
    "p2": [
        "What type of compound is table salt?",
        "Why do the particles of a salt crystal come apart in water?",
        "What holds the particles together inside a salt crystal?",
    ],
    "p3": [
        "What happens to each particle once it leaves the crystal?",
        "What forms around a dissolved particle?",
        "Where do the separated particles end up?",
    ],
    "p4": [
        "Why is oil unable to dissolve in water?",
        "What does oil lack that water needs to hold onto?",
        "Why does oil stay separate from water?",
    ],
}

OPENERS = [
    "Salt disappears in water while oil refuses to mix.",
    "When salt hits water it dissolves almost at once.",
    "You can watch salt vanish while the oil floats.",
    "Mixing both shows salt dissolving and oil separating.",
]

HITS = {
    "p1": [
        "Water is polar, with a plus side and a minus side.",
        "Each water particle is a polar molecule with uneven charge.",
        "Water pulls on things using its charged ends.",
    ],
    "p2": [
        "Salt is an ionic compound made of sodium and chloride.",
        "The salt ions are pulled off the crystal by water.",
        "An electrostatic tug separates the charged particles of the salt.",
    ],
    "p3": [
        "Each freed particle ends up surrounded by water on all sides.",
        "A hydration layer forms around every dissolved particle.",
        "A water cage wraps around each piece that comes loose.",
    ],
    "p4": [
        "Oil is nonpolar, so water slides right past it.",
        "Oil has no charged regions that water could grab.",
        "Oil stays uncharged, so water ignores it completely.",
    ],
}

MISSES = {
    "p1": [
        "Water is a common liquid in the kitchen.",
        "Water flows around whatever sits in the glass.",
        "Water just mixes well with many substances.",
    ],
    "p2": [
        "Salt is a white solid that seems to vanish in water.",
        "Salt simply breaks into smaller and smaller grains.",
        "The salt crystal falls apart bit by bit.",
    ],
    "p3": [
        "The pieces drift through the liquid on their own.",
        "The dissolved bits spread out evenly in the glass.",
        "The particles float freely once they leave the crystal.",
    ],
    "p4": [
        "Oil is thicker than water and floats on top.",
        "Oil just beads up into round droplets.",
        "Oil and water form two separate layers every time.",
    ],
}

REJECT_SENTENCE = "My lab partner claims everything is polar, even oil."
REJECT_RESPONSES = {13, 29}  # zero-based indices whose combo has p4 = 1

FEEDBACK_TEXT = {
    1: "This point is addressed clearly.",
    0: "This point is missing from the answer.",
}

EXPECTED_EXCERPTS = {
    "p1": "Water molecules are polar, with a charged oxygen end and a charged hydrogen end.",
    "p2": "Salt is an ionic compound, so its ions are pulled apart by the charged ends of water.",
    "p3": "The separated ions end up surrounded by shells of water molecules.",
    "p4": "Oil is nonpolar and offers no charged regions for water to grab, so it stays separate.",
}

GRADER_B_FLIPS = [("r06", "p2"), ("r18", "p4"), ("r34", "p1")]


def build_responses() -> list[dict]:
    combos = list(itertools.product([0, 1], repeat=4))
    point_ids = [p["id"] for p in ASSIGNMENT["rubric"]]
    rows = []
    for i in range(40):
        combo = combos[i % 16] if i < 32 else combos[(i - 32) * 2]
        point_sentences = []
        for j, pid in enumerate(point_ids):
            pool = HITS[pid] if combo[j] else MISSES[pid]
            point_sentences.append(pool[(i + j) % 3])
        if i >= 32:
            # last batch talks about the oil side first; also guarantees these
            # texts collide with none of the earlier ones
            point_sentences.reverse()
        sentences = [OPENERS[i % 4], *point_sentences]
        if i in REJECT_RESPONSES:
            assert combo[3] == 1, f"reject special {i} must start with p4 = 1"
            sentences.append(REJECT_SENTENCE)
        rows.append({"id": f"r{i + 1:02d}", "text": " ".join(sentences)})
    return rows


def planted_labels(rows: list[dict], items: dict[str, EvaluationItem]) -> dict[str, dict[str, int]]:
    labels: dict[str, dict[str, int]] = {}
    for row in rows:
        labels[row["id"]] = {}
        for pid, item in items.items():
            text = oracle_grade(item, row["text"])
            assert text.startswith("The student's score is ")
            labels[row["id"]][pid] = int(text[len("The student's score is ")])
    return labels


def check_constraints(rows: list[dict], labels: dict[str, dict[str, int]]) -> None:
    texts = [row["text"] for row in rows]
    for a, b in itertools.permutations(texts, 2):
        assert a not in b, f"response text is a substring of another:\n{a}\n{b}"

    golds = [p["text"] for p in ASSIGNMENT["rubric"]]
    approved = [QUESTIONS[pid][idx] for pid, idx in APPROVALS.items()]
    all_questions = [q for qs in QUESTIONS.values() for q in qs]
    feedback_texts = list(FEEDBACK_TEXT.values())
    scaffolding = [
        ASSIGNMENT["reference_answer"],
        DEFAULT_GENERAL_INSTRUCTION,
        P1_INSTRUCTION,
        *feedback_texts,
    ]
    for gold in golds:
        for haystack in scaffolding + texts + all_questions:
            assert gold not in haystack, f"gold answer {gold!r} occurs in {haystack!r}"
    for question in approved:
        for haystack in scaffolding + texts + golds:
            assert question not in haystack, f"question {question!r} occurs in {haystack!r}"

    for pid, expected in EXPECTED_EXCERPTS.items():
        point_text = next(p["text"] for p in ASSIGNMENT["rubric"] if p["id"] == pid)
        excerpt = extract_gold_excerpt(ASSIGNMENT["reference_answer"], point_text)
        assert excerpt.matched, f"{pid}: excerpt unmatched"
        assert excerpt.text == expected, f"{pid}: excerpt {excerpt.text!r}"

    # every per-item label value occurs somewhere on both sides, so no
    # agreement computation over the fixture is degenerate
    for pid in EXPECTED_EXCERPTS:
        values = {labels[row["id"]][pid] for row in rows}
        assert values == {0, 1}, f"{pid}: planted labels are constant"


def main() -> None:
    assignment = load_assignment(ASSIGNMENT)  # validates the document
    items = {
        p.id: EvaluationItem(
            item_id=p.id,
            rubric_point_id=p.id,
            gold_answer=p.text,
            gold_excerpt="",
            oracle_rules=p.oracle_rules,
        )
        for p in assignment.rubric
    }
    rows = build_responses()
    labels = planted_labels(rows, items)
    check_constraints(rows, labels)

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "assignment.json").write_text(
        json.dumps(ASSIGNMENT, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (OUT / "responses.jsonl").write_text(
        "".join(json.dumps(row, ensure_ascii=False) + "\n" for row in rows), encoding="utf-8"
    )
    (OUT / "questions.json").write_text(
        json.dumps(QUESTIONS, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    def label_rows(grader_id: str, role: str, flips: list[tuple[str, str]] = []) -> str:
        lines = []
        for row in rows:
            for pid in EXPECTED_EXCERPTS:
                value = labels[row["id"]][pid]
                if (row["id"], pid) in flips:
                    value = 1 - value
                lines.append(
                    json.dumps(
                        {
                            "grader_id": grader_id,
                            "response_id": row["id"],
                            "item_id": pid,
                            "label": value,
                            "role": role,
                        }
                    )
                )
        return "\n".join(lines) + "\n"

    (OUT / "labels.jsonl").write_text(label_rows("adjudicated", "ground_truth"), encoding="utf-8")
    (OUT / "grader_a.jsonl").write_text(label_rows("grader_a", "grader"), encoding="utf-8")
    (OUT / "grader_b.jsonl").write_text(
        label_rows("grader_b", "grader", GRADER_B_FLIPS), encoding="utf-8"
    )

    feedback = {
        row["id"]: {
            pid: {"grade": labels[row["id"]][pid], "feedback": FEEDBACK_TEXT[labels[row["id"]][pid]]}
            for pid in EXPECTED_EXCERPTS
        }
        for row in rows
    }
    (OUT / "feedback.json").write_text(
        json.dumps(feedback, indent=1, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    score_counts: dict[int, int] = {}
    for row in rows:
        total = sum(labels[row["id"]].values())
        score_counts[total] = score_counts.get(total, 0) + 1
    print(f"wrote fixture to {OUT}")
    print(f"final-score distribution over 40 responses: {dict(sorted(score_counts.items()))}")


if __name__ == "__main__":
    main()
