"""Acceptance gate: every criterion runs at its stated tolerance and prints
one pass/fail line."""

import pytest

from saddlelab.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("name,fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance_criterion(name, fn):
    result = run_criterion(name, fn)
    print(result.line)
    assert result.passed, result.line
