"""One test per acceptance criterion; run with ``pytest -s`` to see the PASS/FAIL lines."""

import pytest

from paa.acceptance import CHECKS, run_check


@pytest.mark.parametrize("entry", CHECKS, ids=[f"{num:02d}-{name}" for num, name, _, _ in CHECKS])
def test_criterion(entry):
    res = run_check(entry)
    print(res.line())
    assert res.passed, res.line()
