"""Goal-function tests against independent quadrature / differencing oracles."""

import numpy as np
import pytest

from gora import GoalDomainError, GoalFunctionError, from_records, make_goal
from oracles import central_difference, piecewise_simpson, simpson

QUAD = make_goal([0.0], [[25.0, -10.0, 1.0]])  # (delta - 5)^2
# (delta-8)^4/4 - 8*(delta-8)^2 + 100, two global minima
BIMODAL = make_goal([0.0], [[612.0, -384.0, 88.0, -8.0, 0.25]])
# 10 - delta on [0, 4), (delta-5)^2 + 5 afterwards; continuous at 4 (value 6)
PIECEWISE = make_goal([0.0, 4.0], [[10.0, -1.0], [30.0, -10.0, 1.0]])


def random_goal(rng, n_kinks=None, max_deg=4):
    """Random continuous piecewise polynomial with a non-decreasing tail."""
    k = rng.integers(0, 4) if n_kinks is None else n_kinks
    bps = [0.0] + sorted(rng.uniform(0.5, 20.0, size=k).tolist())
    pieces = []
    level = rng.uniform(-5.0, 5.0)
    for j in range(k + 1):
        deg = int(rng.integers(0, max_deg + 1))
        coeffs = rng.uniform(-2.0, 2.0, size=deg + 1)
        if j == k and deg > 0:
            coeffs[-1] = abs(coeffs[-1]) + 0.1
        # pin the constant term so the piece starts at the running level
        coeffs[0] = 0.0
        coeffs[0] = level - np.polynomial.polynomial.polyval(bps[j], coeffs)
        pieces.append(coeffs.tolist())
        if j < k:
            level = np.polynomial.polynomial.polyval(bps[j + 1], coeffs)
    return make_goal(bps, pieces)


def test_quadratic_integrals_match_quadrature_oracle():
    # frozen from the adaptive-Simpson oracle (= 61/3 and 1/3)
    assert QUAD.integral(0.0, 1.0) == pytest.approx(20.333333333333332, rel=1e-12)
    assert QUAD.integral(4.0, 5.0) == pytest.approx(0.3333333333333333, rel=1e-12)
    f = lambda x: (x - 5.0) ** 2
    assert QUAD.integral(0.3, 7.9) == pytest.approx(simpson(f, 0.3, 7.9), rel=1e-10)


def test_piecewise_integrals_match_quadrature_oracle():
    # frozen from the piecewise-Simpson oracle
    assert PIECEWISE.integral(0.0, 10.0) == pytest.approx(104.0, rel=1e-12)
    assert PIECEWISE.integral(3.5, 4.5) == pytest.approx(5.916666666666666, rel=1e-12)


def test_integral_additivity():
    rng = np.random.default_rng(7)
    for _ in range(200):
        h = random_goal(rng)
        a, b, c = np.sort(rng.uniform(0.0, 30.0, size=3))
        whole = h.integral(a, c)
        split = h.integral(a, b) + h.integral(b, c)
        assert abs(whole - split) <= 1e-12 * max(1.0, abs(whole))


def test_derivative_matches_central_difference():
    rng = np.random.default_rng(11)
    for _ in range(100):
        h = random_goal(rng)
        x = rng.uniform(0.1, 25.0)
        # keep clear of kinks where one-sided derivatives differ
        if any(abs(x - b) < 1e-3 for b in h.breakpoints):
            continue
        fd = central_difference(h.value, x, h=1e-4)
        assert h.slope(x) == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_random_piecewise_matches_oracle_integrals():
    rng = np.random.default_rng(23)
    for _ in range(100):
        h = random_goal(rng)
        a, b = np.sort(rng.uniform(0.0, 30.0, size=2))
        want = piecewise_simpson(h.value, a, b, h.breakpoints)
        assert h.integral(a, b) == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_vectorised_evaluation_matches_scalar():
    rng = np.random.default_rng(3)
    h = random_goal(rng, n_kinks=3)
    xs = rng.uniform(0.0, 30.0, size=257)
    np.testing.assert_allclose(h.values(xs), [h.value(x) for x in xs], rtol=1e-14)
    np.testing.assert_allclose(h.slopes(xs), [h.slope(x) for x in xs], rtol=1e-14)
    np.testing.assert_allclose(
        h.cumulatives(xs), [h.integral(0.0, x) for x in xs], rtol=1e-13, atol=1e-13
    )


def test_argmin_quadratic_is_vertex():
    res = QUAD.argmin_set()
    assert not res.flat
    assert res.points == pytest.approx((5.0,), abs=1e-9)
    assert res.min_value == pytest.approx(0.0, abs=1e-12)


def test_argmin_bimodal_quartic_finds_both_minima():
    # frozen from a dense-grid scan: minima at 4 and 12, value 36
    res = BIMODAL.argmin_set()
    assert len(res.points) == 2
    assert res.points == pytest.approx((4.0, 12.0), abs=1e-8)
    assert res.min_value == pytest.approx(36.0, rel=1e-12)


def test_argmin_monotone_is_origin():
    h = make_goal([0.0], [[1.0, 2.0]])
    assert h.argmin_set().points == pytest.approx((0.0,))


def test_argmin_at_kink():
    # decreasing, then a parabola with vertex at 5: global min is the vertex
    res = PIECEWISE.argmin_set()
    assert res.points == pytest.approx((5.0,), abs=1e-9)
    assert res.min_value == pytest.approx(5.0, rel=1e-12)


def test_argmin_flat_is_flagged():
    res = make_goal([0.0], [[3.0]]).argmin_set()
    assert res.flat
    assert res.points == ()
    assert res.min_value == 3.0


def test_argmin_matches_grid_scan_on_random_goals():
    rng = np.random.default_rng(41)
    checked = 0
    for _ in range(40):
        h = random_goal(rng)
        if h.is_flat():
            continue
        res = h.argmin_set()
        xs = np.linspace(0.0, 40.0, 400_001)
        ys = h.values(xs)
        gmin = ys.min()
        # grid only sees [0, 40]; skip goals whose tail keeps decreasing there
        if h.value(40.0) <= gmin + 1e-6:
            continue
        scale = max(1.0, abs(gmin))
        # analytic minimum beats every grid point and is actually attained
        assert res.min_value <= gmin + 1e-9 * scale
        for p in res.points:
            assert h.value(p) == pytest.approx(res.min_value, abs=1e-8 * scale)
        # every tied run of grid points (a basin, or a flat segment whose
        # endpoints stand in for the interior) must touch a reported point
        tied = xs[ys <= gmin + 1e-9 * scale]
        run_breaks = np.flatnonzero(np.diff(tied) > 2.5e-4)
        for run in np.split(tied, run_breaks + 1):
            for endpoint in (run[0], run[-1]):
                assert min(abs(endpoint - p) for p in res.points) < 0.05
        checked += 1
    assert checked >= 20


def test_value_at_breakpoint_uses_right_piece():
    assert PIECEWISE.value(4.0) == pytest.approx(6.0)
    assert PIECEWISE.slope(4.0) == pytest.approx(2.0 * 4.0 - 10.0)  # right-hand
    left, right = PIECEWISE.one_sided_slopes(4.0)
    assert left == pytest.approx(-1.0)
    assert right == pytest.approx(-2.0)


def test_slot_penalty_is_slot_average():
    for k in (0, 3, 17):
        for d in (0.5, 1.0, 2.0):
            want = QUAD.integral(k * d, (k + 1) * d) / d
            assert QUAD.slot_penalty(k, d) == pytest.approx(want, rel=1e-12)
    assert QUAD.slot_penalty(2.0, 1.0) == QUAD.slot_penalty(2, 1.0)


@pytest.mark.parametrize(
    "k, d",
    [(-1, 1.0), (1.5, 1.0), (2, 0.0), (2, -1.0)],
)
def test_slot_penalty_rejects_bad_arguments(k, d):
    with pytest.raises(GoalDomainError):
        QUAD.slot_penalty(k, d)


def test_domain_errors():
    with pytest.raises(GoalDomainError):
        QUAD.value(-0.5)
    with pytest.raises(GoalDomainError):
        QUAD.integral(2.0, 1.0)
    with pytest.raises(GoalDomainError):
        QUAD.integral(-1.0, 1.0)


@pytest.mark.parametrize(
    "bps, pieces, fragment",
    [
        ([1.0], [[0.0]], "first breakpoint"),
        ([0.0, 2.0, 2.0], [[0.0], [0.0], [0.0]], "ascending"),
        ([0.0, 2.0], [[0.0]], "one piece per breakpoint"),
        ([0.0], [[0.0] * 7 + [1.0]], "degree"),
        ([0.0, 1.0], [[0.0], [5.0]], "discontinuous"),
        ([0.0], [[1.0, -1.0]], "tail not eventually non-decreasing"),
        ([0.0], [[0.0, 1.0, float("nan")]], "finite"),
        ([0.0], [[]], "at least one coefficient"),
    ],
)
def test_construction_errors(bps, pieces, fragment):
    with pytest.raises(GoalFunctionError, match=fragment):
        make_goal(bps, pieces)


def test_decreasing_then_flat_tail_is_allowed():
    h = make_goal([0.0, 5.0], [[5.0, -1.0], [0.0]])
    assert h.value(100.0) == 0.0


def test_trailing_zeros_do_not_count_towards_degree():
    h = make_goal([0.0], [[25.0, -10.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]])
    assert h.max_degree == 2
    assert h.value(7.0) == pytest.approx(4.0)


def test_from_records_round_trip():
    h = from_records(
        [
            {"start_age": 4.0, "coefficients": [30.0, -10.0, 1.0]},
            {"start_age": 0, "coefficients": [10, -1]},
        ]
    )
    assert h.breakpoints == PIECEWISE.breakpoints
    assert h.pieces == PIECEWISE.pieces


@pytest.mark.parametrize(
    "records",
    [
        [],
        [{"start_age": 1.0, "coefficients": [1.0]}],
        [{"coefficients": [1.0]}],
        [{"start_age": 0.0}],
    ],
)
def test_from_records_rejects_malformed_input(records):
    with pytest.raises(GoalFunctionError):
        from_records(records)
