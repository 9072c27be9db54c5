"""Acceptance criteria 1-9; one PASS/FAIL line per criterion is printed at the end of the run.

The criteria themselves live in ``acceptance_criteria.py`` (also runnable as a script).
"""
import time

import pytest

import acceptance_criteria as ac

#: criterion -> (passed, payload, seconds); filled as the tests run
RESULTS = {}
LINES = {}


def _run(k):
    if k not in RESULTS:
        RESULTS[k] = ac.run(k)
        passed, _, dt = RESULTS[k]
        LINES[k] = ac.line(k, passed, dt)
    return RESULTS[k]


SLOW = {7}


@pytest.mark.parametrize("k", [pytest.param(k, marks=pytest.mark.slow) if k in SLOW else k
                               for k in sorted(ac.CRITERIA)])
def test_criterion(k):
    passed, payload, dt = _run(k)
    limit = ac.RUNTIME_LIMITS.get(k)
    assert passed, f"criterion {k} failed after {dt:.2f} s (limit {limit}): {payload}"


@pytest.mark.slow
def test_criterion_9_determinism():
    payloads = {k: _run(k)[1] for k in sorted(ac.CRITERIA)}
    t0 = time.perf_counter()
    passed, detail = ac.criterion_9(payloads)
    LINES[9] = ac.line(9, passed, time.perf_counter() - t0)
    assert passed, detail
