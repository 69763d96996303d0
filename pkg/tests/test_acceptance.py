"""The acceptance gate: every criterion at its stated tolerance.

Criteria run once per session (shared fixture) and each test asserts one
criterion, so the report shows exactly which line failed.  One pass/fail
line per criterion is printed as results arrive; `ergo-moments verify`
prints the same lines.
"""

import pytest

from ergo_moments.acceptance import CRITERIA

_RESULTS = {}


@pytest.fixture(scope="session")
def results():
    return _RESULTS


def _run(number, results):
    if number not in results:
        res = CRITERIA[number](seed=0, threads=1)
        results[number] = res
        print("\n" + res.line())
    return results[number]


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, results):
    res = _run(number, results)
    assert res.passed, res.line()
