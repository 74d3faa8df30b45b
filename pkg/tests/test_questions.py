from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from qagrader.errors import BackendError, ConflictError, ValidationError
from qagrader.questions import (
    EvaluationItem,
    ManualQuestionBackend,
    ScriptedQuestionBackend,
    approve_question,
    build_evaluation_items,
    extract_gold_excerpt,
    generate_candidate_questions,
    items_from_document,
    items_to_document,
    mark_target_answers,
    split_sentences,
    tokenize,
)


class TestMarkTargetAnswers:
    def test_rubric_order_preserved(self, mini_assignment):
        assert mark_target_answers(mini_assignment) == [
            ("q1", "O/OH"),
            ("q2", "H-Bonds"),
            ("q3", "C and H"),
            ("q4", "non-polar"),
        ]

    def test_single_point(self, mini_assignment):
        from dataclasses import replace

        single = replace(mini_assignment, rubric=mini_assignment.rubric[:1])
        assert mark_target_answers(single) == [("q1", "O/OH")]

    def test_length_matches_rubric(self, fixture_assignment):
        assert len(mark_target_answers(fixture_assignment)) == len(fixture_assignment.rubric)

    def test_seven_point_rubric_keeps_order(self):
        from fractions import Fraction

        from qagrader.models import Assignment, RubricPoint

        rubric = tuple(
            RubricPoint(id=f"k{i}", text=f"target {i}", weight=Fraction(1)) for i in range(7)
        )
        assignment = Assignment(
            id="a", problem_text="p", reference_answer="One sentence.", rubric=rubric
        )
        pairs = mark_target_answers(assignment)
        assert len(pairs) == 7
        assert [pid for pid, _ in pairs] == [f"k{i}" for i in range(7)]


class TestTokenize:
    def test_slash_splits(self):
        assert tokenize("O/OH") == ["o", "oh"]

    def test_punctuation_stripped(self):
        assert tokenize("non-polar, (very) hydrophobic!") == [
            "non",
            "polar",
            "very",
            "hydrophobic",
        ]


class TestExtractGoldExcerpt:
    def test_substring_match_picks_one_sentence(self, mini_assignment):
        result = extract_gold_excerpt(mini_assignment.reference_answer, "C and H")
        assert result.matched
        assert result.text == "Molecule 1 consists entirely of C and H atoms."

    def test_single_sentence_reference(self):
        result = extract_gold_excerpt("Water is polar.", "anything at all with polar")
        assert result.text == "Water is polar."

    def test_zero_overlap_returns_whole_text_flagged(self):
        result = extract_gold_excerpt("A. B. C.", "zebra")
        assert not result.matched
        assert result.text == "A. B. C."

    def test_match_spanning_sentences_keeps_run_contiguous(self):
        reference = "The first fact. The second fact. The third fact."
        result = extract_gold_excerpt(reference, "fact. The second")
        assert result.matched
        assert result.text == "The first fact. The second fact."

    def test_token_overlap_tie_breaks_earliest(self):
        reference = "Alpha beta here. Gamma beta there."
        result = extract_gold_excerpt(reference, "beta")
        assert result.matched
        assert result.text == "Alpha beta here."

    def test_empty_reference_rejected(self):
        with pytest.raises(ValidationError):
            extract_gold_excerpt("   ", "x")

    def test_deterministic(self, mini_assignment):
        first = extract_gold_excerpt(mini_assignment.reference_answer, "O/OH")
        second = extract_gold_excerpt(mini_assignment.reference_answer, "O/OH")
        assert first == second

    @given(st.text(alphabet="abcdef .!?", min_size=1).filter(lambda s: s.strip()))
    def test_excerpt_is_sentence_run_of_reference(self, reference):
        result = extract_gold_excerpt(reference, "abc")
        sentences = split_sentences(reference)
        excerpt_sentences = split_sentences(result.text)
        if not result.matched:
            assert result.text == reference.strip()
            return
        # the excerpt's sentences appear contiguously in the reference
        assert excerpt_sentences
        for start in range(len(sentences) - len(excerpt_sentences) + 1):
            if sentences[start : start + len(excerpt_sentences)] == excerpt_sentences:
                break
        else:
            pytest.fail(f"{excerpt_sentences} not contiguous in {sentences}")


class TestCandidateGeneration:
    def test_scripted_backend_returns_fixed_strings(self):
        backend = ScriptedQuestionBackend(
            {"q3": ["What does molecule 1 consist of?", "Second?", "Third?"]}
        )
        candidates, degraded = generate_candidate_questions(
            "ref", "C and H", 3, backend, rubric_point_id="q3"
        )
        assert candidates == ["What does molecule 1 consist of?", "Second?", "Third?"]
        assert not degraded

    def test_manual_backend_passthrough(self):
        backend = ManualQuestionBackend(["What does molecule 1 consist of?"])
        candidates, degraded = generate_candidate_questions("ref", "C and H", 1, backend)
        assert candidates == ["What does molecule 1 consist of?"]
        assert not degraded

    def test_short_backend_output_flags_degraded(self):
        backend = ManualQuestionBackend(["only one"])
        candidates, degraded = generate_candidate_questions("ref", "x", 3, backend)
        assert candidates == ["only one"]
        assert degraded

    def test_duplicates_collapsed(self):
        backend = ManualQuestionBackend(["same", "same", "other"])
        candidates, degraded = generate_candidate_questions("ref", "x", 3, backend)
        assert candidates == ["same", "other"]
        assert degraded

    def test_empty_output_is_backend_error(self):
        backend = ManualQuestionBackend([])
        with pytest.raises(BackendError):
            generate_candidate_questions("ref", "x", 3, backend)

    def test_backend_exception_wrapped(self):
        class Exploding:
            def generate(self, *args, **kwargs):
                raise RuntimeError("boom")

        with pytest.raises(BackendError, match="boom"):
            generate_candidate_questions("ref", "x", 3, Exploding())


class TestApproval:
    def _pending(self):
        return EvaluationItem(
            item_id="q3",
            rubric_point_id="q3",
            gold_answer="C and H",
            gold_excerpt="Molecule 1 consists entirely of C and H atoms.",
            candidates=("first?", "second?", "third?"),
        )

    def test_choose_candidate(self):
        approved = approve_question(self._pending(), "second?")
        assert approved.approved
        assert approved.approved_question == "second?"
        assert approved.version == 1

    def test_instruction_stored_verbatim(self):
        instruction = (
            "As long as the answer mentions or implies that the molecule contains "
            "just carbon, it should be considered as being correct and graded as 1."
        )
        approved = approve_question(self._pending(), "first?", instruction)
        assert approved.question_specific_instruction == instruction

    def test_double_approval_conflicts_without_revise(self):
        approved = approve_question(self._pending(), "first?")
        with pytest.raises(ConflictError):
            approve_question(approved, "second?")
        revised = approve_question(approved, "second?", revise=True)
        assert revised.approved_question == "second?"
        assert revised.version == 2

    def test_empty_choice_rejected(self):
        with pytest.raises(ValidationError):
            approve_question(self._pending(), "   ")


class TestBuildItems:
    def test_items_share_rubric_order_and_gold_answers(self, mini_assignment):
        backend = ScriptedQuestionBackend(
            {pid: [f"{pid} question {i}?" for i in range(3)] for pid in ("q1", "q2", "q3", "q4")}
        )
        items = build_evaluation_items(mini_assignment, backend)
        assert [i.item_id for i in items] == [p.id for p in mini_assignment.rubric]
        assert [i.gold_answer for i in items] == [p.text for p in mini_assignment.rubric]
        assert all(i.status == "pending" for i in items)
        assert all(len(i.candidates) == 3 for i in items)
        assert items[0].oracle_rules is not None  # copied from the rubric point

    def test_document_round_trip(self, mini_assignment):
        backend = ScriptedQuestionBackend(
            {pid: [f"{pid}?"] for pid in ("q1", "q2", "q3", "q4")}
        )
        items = build_evaluation_items(mini_assignment, backend, k=1)
        items[0] = approve_question(items[0], "edited?")
        doc = items_to_document(mini_assignment.id, items)
        assignment_id, reloaded = items_from_document(doc)
        assert assignment_id == mini_assignment.id
        assert reloaded == items
