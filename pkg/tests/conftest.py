from __future__ import annotations

from fractions import Fraction

import pytest

from qagrader import fixture as fixture_pkg
from qagrader.models import (
    Assignment,
    OracleRules,
    RubricPoint,
    StudentResponse,
    load_assignment,
    load_responses,
)


@pytest.fixture(scope="session")
def fixture_assignment() -> Assignment:
    return load_assignment(fixture_pkg.ASSIGNMENT)


@pytest.fixture(scope="session")
def fixture_responses() -> list[StudentResponse]:
    responses, dropped = load_responses(fixture_pkg.RESPONSES)
    assert dropped == 0
    return responses


@pytest.fixture
def mini_assignment() -> Assignment:
    """Small inline molecule-ranking assignment used across unit tests."""
    reference = (
        "Molecule 1 consists entirely of C and H atoms. "
        "This makes molecule 1 entirely non-polar and therefore very hydrophobic. "
        "Molecule 3 has an O atom which can form hydrogen bonds, making it polar and hydrophilic."
    )
    return Assignment(
        id="molecules-1",
        problem_text="Explain your hydrophobicity ranking of the three molecules.",
        reference_answer=reference,
        rubric=(
            RubricPoint(
                id="q1",
                text="O/OH",
                weight=Fraction(1),
                oracle_rules=OracleRules(accept=("oxygen", "o atom", "oh")),
            ),
            RubricPoint(id="q2", text="H-Bonds", weight=Fraction(1)),
            RubricPoint(id="q3", text="C and H", weight=Fraction(1)),
            RubricPoint(id="q4", text="non-polar", weight=Fraction(1)),
        ),
    )
