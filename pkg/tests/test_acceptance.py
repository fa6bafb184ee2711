"""The sixteen acceptance criteria at their stated settings and tolerances.

Each test prints, and records for the terminal summary, one pass/fail line.
"""
import pytest

from gfperc import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    res = acceptance.run_criterion(number)
    line = res.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert res.passed, line
    assert res.within_budget, f"over the {res.budget_s:.0f}s budget: {line}"
