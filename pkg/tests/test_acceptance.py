"""Acceptance gate: every registered validation check, one verdict each.

Each test runs one check from the validation suite and prints a single
PASS/FAIL line (visible with -s or in captured output), then asserts the
verdict. Budgets are enforced inside the suite: a slow pass is a failure.
"""

import pytest

from gora.validate import _CHECKS, run_suite

_TITLES = {cid: title for cid, title, _, _ in _CHECKS}


def run_one(check_id, mutate_hessian=False):
    results = run_suite([check_id], mutate_hessian=mutate_hessian)
    assert len(results) == 1
    r = results[0]
    verdict = "PASS" if r.passed else "FAIL"
    print(
        f"criterion {check_id} ({_TITLES[check_id]}): {verdict} "
        f"[{r.seconds:.1f}s / budget {r.budget:.0f}s] {r.detail}"
    )
    return r


@pytest.mark.parametrize("check_id", [cid for cid, _, _, _ in _CHECKS])
def test_criterion(check_id):
    r = run_one(check_id)
    assert r.passed, f"criterion {check_id}: {r.detail}"


def test_planted_hessian_error_is_caught():
    # meta-check: a 0.5% corruption of the cross derivative must flip the
    # hessian criterion to FAIL, proving the tolerance has teeth
    r = run_one("2", mutate_hessian=True)
    assert not r.passed, "hessian check accepted a corrupted formula"
