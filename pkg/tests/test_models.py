from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from qagrader.errors import IngestError, ValidationError
from qagrader.models import (
    LabelSet,
    load_assignment,
    load_label_sets,
    load_labels,
    load_responses,
    parse_weight,
    responses_to_jsonl,
    weight_to_json,
)


def _assignment_doc(rubric):
    return {
        "id": "a1",
        "problem_text": "Explain the ranking.",
        "reference_answer": "Molecule 1 consists entirely of C and H atoms.",
        "rubric": rubric,
    }


class TestLoadAssignment:
    def test_unit_weights_sum_to_four(self):
        rubric = [
            {"id": f"q{i}", "text": text, "weight": 1}
            for i, text in enumerate(["O/OH", "H-Bonds", "C and H", "non-polar"], start=1)
        ]
        assignment = load_assignment(_assignment_doc(rubric))
        assert assignment.max_score == 4
        assert [p.text for p in assignment.rubric] == ["O/OH", "H-Bonds", "C and H", "non-polar"]

    def test_mixed_weights_sum(self):
        rubric = [
            {"id": "a", "text": "x", "weight": 2},
            {"id": "b", "text": "y", "weight": 1},
            {"id": "c", "text": "z", "weight": 1},
        ]
        assert load_assignment(_assignment_doc(rubric)).max_score == 4

    def test_empty_rubric_rejected(self):
        with pytest.raises(ValidationError, match="rubric"):
            load_assignment(_assignment_doc([]))

    def test_missing_field_named(self):
        doc = _assignment_doc([{"id": "a", "text": "x", "weight": 1}])
        del doc["reference_answer"]
        with pytest.raises(IngestError, match="reference_answer"):
            load_assignment(doc)

    def test_duplicate_point_id_named(self):
        rubric = [
            {"id": "a", "text": "x", "weight": 1},
            {"id": "a", "text": "y", "weight": 1},
        ]
        with pytest.raises(ValidationError, match=r"rubric\[1\].id"):
            load_assignment(_assignment_doc(rubric))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="weight"):
            load_assignment(_assignment_doc([{"id": "a", "text": "x", "weight": -1}]))

    def test_empty_point_text_rejected(self):
        with pytest.raises(ValidationError, match=r"rubric\[0\].text"):
            load_assignment(_assignment_doc([{"id": "a", "text": "  ", "weight": 1}]))

    def test_round_trip(self):
        rubric = [
            {"id": "a", "text": "x", "weight": 2},
            {"id": "b", "text": "y", "weight": 0.5},
            {"id": "c", "text": "z", "weight": "1/3"},
        ]
        first = load_assignment(_assignment_doc(rubric))
        second = load_assignment(first.to_dict())
        assert first == second
        assert second.max_score == Fraction(17, 6)


class TestWeights:
    def test_float_reads_as_decimal(self):
        assert parse_weight(0.1) == Fraction(1, 10)

    def test_fraction_string(self):
        assert parse_weight("1/3") == Fraction(1, 3)

    def test_bool_rejected(self):
        with pytest.raises(ValidationError):
            parse_weight(True)

    @given(st.fractions(min_value=0, max_value=1000))
    def test_weight_json_round_trip(self, weight):
        assert parse_weight(weight_to_json(weight)) == weight


class TestLoadResponses:
    def test_blank_rows_dropped_with_count(self, tmp_path):
        rows = [{"id": f"{9328600 + i}", "text": f"answer {i}"} for i in range(175)]
        rows.insert(40, {"id": "9328999", "text": "   "})
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        responses, dropped = load_responses(path)
        assert len(responses) == 175
        assert dropped == 1
        assert [r.id for r in responses] == sorted(r.id for r in responses)

    def test_empty_corpus(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("", encoding="utf-8")
        assert load_responses(path) == ([], 0)

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text(
            json.dumps({"id": "9328795", "text": "a"})
            + "\n"
            + json.dumps({"id": "9328795", "text": "b"}),
            encoding="utf-8",
        )
        with pytest.raises(IngestError, match="9328795"):
            load_responses(path)

    def test_csv_corpus(self, tmp_path):
        path = tmp_path / "corpus.csv"
        path.write_text("id,text\nr2,second answer\nr1,first answer\n", encoding="utf-8")
        responses, dropped = load_responses(path)
        assert [r.id for r in responses] == ["r1", "r2"]
        assert dropped == 0

    def test_csv_requires_header(self, tmp_path):
        path = tmp_path / "corpus.csv"
        path.write_text("ident,body\nr1,hello\n", encoding="utf-8")
        with pytest.raises(IngestError, match="header"):
            load_responses(path)

    def test_jsonl_round_trip(self, tmp_path):
        rows = [{"id": "r1", "text": "first"}, {"id": "r2", "text": "second"}]
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        responses, _ = load_responses(path)
        path2 = tmp_path / "round.jsonl"
        path2.write_text(responses_to_jsonl(responses), encoding="utf-8")
        assert load_responses(path2) == (responses, 0)


def _label_rows(n_responses=175, n_items=4):
    return [
        {
            "grader_id": "g1",
            "response_id": f"r{i}",
            "item_id": f"q{j}",
            "label": (i + j) % 2,
            "role": "grader",
        }
        for i in range(n_responses)
        for j in range(n_items)
    ]


def _ids(n_responses=175, n_items=4):
    return [f"r{i}" for i in range(n_responses)], [f"q{j}" for j in range(n_items)]


class TestLoadLabels:
    def test_full_grid_cell_count(self):
        responses, items = _ids()
        label_set = load_labels(_label_rows(), responses, items)
        assert len(label_set.cells) == 700

    def test_label_domain_enforced(self):
        responses, items = _ids(1, 1)
        rows = _label_rows(1, 1)
        rows[0]["label"] = 2
        with pytest.raises(ValidationError, match="label"):
            load_labels(rows, responses, items)

    def test_unknown_item_rejected(self):
        responses, items = _ids(1, 1)
        rows = _label_rows(1, 1)
        rows[0]["item_id"] = "q99"
        with pytest.raises(ValidationError, match="q99"):
            load_labels(rows, responses, items)

    def test_unknown_response_rejected(self):
        responses, items = _ids(1, 1)
        rows = _label_rows(1, 1)
        rows[0]["response_id"] = "missing"
        with pytest.raises(ValidationError, match="missing"):
            load_labels(rows, responses, items)

    def test_mixed_graders_need_filter(self):
        responses, items = _ids(2, 1)
        rows = _label_rows(2, 1)
        rows[1]["grader_id"] = "g2"
        with pytest.raises(IngestError, match="multiple graders"):
            load_labels(rows, responses, items)
        only_g2 = load_labels(rows, responses, items, grader_id="g2")
        assert only_g2.grader_id == "g2"
        assert len(only_g2.cells) == 1

    def test_grouped_sets(self):
        responses, items = _ids(2, 2)
        rows = _label_rows(2, 2)
        for row in rows[:2]:
            row["grader_id"] = "g2"
        sets = load_label_sets(rows, responses, items)
        assert {s.grader_id for s in sets} == {"g1", "g2"}

    def test_partial_grid_unlabeled(self):
        responses, items = _ids(2, 2)
        rows = _label_rows(2, 2)[:3]
        label_set = load_labels(rows, responses, items)
        assert label_set.unlabeled(responses, items) == [("r1", "q1")]


@given(
    st.dictionaries(
        st.tuples(st.sampled_from(["r1", "r2", "r3"]), st.sampled_from(["q1", "q2"])),
        st.integers(min_value=0, max_value=1),
        min_size=1,
    )
)
def test_label_set_row_round_trip(cells):
    label_set = LabelSet(grader_id="g", role="grader", cells=cells)
    reloaded = load_labels(label_set.to_rows(), ["r1", "r2", "r3"], ["q1", "q2"])
    assert reloaded == label_set
