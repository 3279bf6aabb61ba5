"""Optimizer tests: rounding, boundary reduction, oracle cross-checks."""

import dataclasses

import numpy as np
import pytest

from gora import make_goal
from gora.optimizer import (
    POLICIES,
    BruteForceRanges,
    OptimizerOptions,
    brute_force_reference,
    corollary2_diagnostic,
    optimize,
    round_to_integers,
    solve_fixed_tau,
)
from gora.renewal import PolicyParams, cycle_stats, steady_state_ps

QUAD = make_goal([0.0], [[25.0, -10.0, 1.0]])  # (delta - 5)^2
LINEAR = make_goal([0.0], [[0.0, 1.0]])
CONST = make_goal([0.0], [[7.0]])
# (delta-8)^4/4 - 8*(delta-8)^2 + 100, two local minima
BIMODAL = make_goal([0.0], [[612.0, -384.0, 88.0, -8.0, 0.25]])
# descending steps into a plateau and back out; admits an interior root
RIDGE = make_goal(
    [0.0, 6.0, 11.0, 14.0, 17.0],
    [[45.0, -5.0], [24.0, -1.5], [-31.0, 3.5], [95.0, -5.5], [-18.9, 1.2]],
)
# cliff down to the minimum at 100, gentle quadratic beyond: the cheapest
# window starts exactly at the minimizer, so no minimizer is strictly inside
CLIFF = make_goal([0.0, 100.0], [[1.0e6, -10000.0], [100.0, -2.0, 0.01]])


def oracle_penalty(h, n, b, tau, gamma, d=1.0):
    """Independent L: fresh channel solve plus one series pass."""
    ch = steady_state_ps(n, tau, float(gamma))
    p = PolicyParams(b=float(b), tau=tau, gamma=float(gamma), d=d)
    return cycle_stats(h, p, ch).value


def result_key(res):
    return tuple(
        getattr(res, f.name)
        for f in dataclasses.fields(res)
        if f.name != "diagnostics"
    )


# -- integer rounding ------------------------------------------------------


def test_round_keeps_integral_input():
    # at n=9, tau=0.4 the integer argmin in gamma on the b=0 face is 17,
    # so an already-integral solution must come back untouched
    b, g, L, _ = round_to_integers(QUAD, 9, 0.4, 1.0, (0.0, 17.0))
    assert (b, g) == (0, 17)
    assert L == pytest.approx(oracle_penalty(QUAD, 9, 0, 0.4, 17), rel=1e-12)


def test_round_picks_best_neighbor_by_exhaustive_scan():
    b, g, L, _ = round_to_integers(QUAD, 12, 0.3, 1.0, (3.5, 20.2))
    # documented candidate set: floor/ceil corners, the b=0 face, one
    # extra gamma step each way
    cand_b = (0, 3, 4)
    cand_g = (19, 20, 21, 22)
    scan = {
        (bb, gg): oracle_penalty(QUAD, 12, bb, 0.3, gg)
        for bb in range(0, 11)
        for gg in range(10, 31)
    }
    best = min(
        ((scan[(bb, gg)], bb, gg) for bb in cand_b for gg in cand_g),
        key=lambda c: (c[0], c[1], c[2]),
    )
    assert (b, g) == (best[1], best[2])
    assert L == pytest.approx(scan[(b, g)], rel=1e-12)


def test_round_constant_goal_tie_breaks_to_origin():
    b, g, L, _ = round_to_integers(CONST, 12, 0.3, 1.0, (0.2, 0.7))
    assert (b, g) == (0, 0)
    assert L == 7.0


# -- optimize: boundary reductions and invariants --------------------------


def test_monotone_goal_reduces_to_threshold_policy():
    g = optimize(LINEAR, 20)
    t = optimize(LINEAR, 20, policy="TA")
    assert g.b_star == 0
    assert g.gamma_star == t.gamma_star
    assert g.tau_star == pytest.approx(t.tau_star, rel=1e-9)
    assert g.L_star == pytest.approx(t.L_star, rel=1e-9)


def test_fixed_tau_increasing_goal_sits_on_b0_face():
    ft = solve_fixed_tau(LINEAR, 20, 0.1, 1.0)
    assert ft.b == 0.0
    assert ft.f1 > 0.0


def test_optimize_is_deterministic():
    assert result_key(optimize(QUAD, 18)) == result_key(optimize(QUAD, 18))


def test_policy_dominance_chain():
    res = {p: optimize(QUAD, 35, policy=p) for p in POLICIES}
    assert res["TA"].b_star == 0
    assert res["SA"].b_star == 0 and res["SA"].gamma_star == 0
    assert res["GORA"].L_star <= res["TA"].L_star * (1 + 1e-6)
    assert res["TA"].L_star <= res["SA"].L_star * (1 + 1e-6)


def test_pure_quadratic_has_no_interior_root():
    # at frozen p_s the cycle-average residual of a parabola never
    # vanishes, so the relaxation always lands on a face or corner
    r = optimize(QUAD, 30)
    assert r.boundary != "interior"
    assert r.f2 > 0.0


def test_interior_stationarity_on_ridge():
    r = optimize(RIDGE, 8)
    assert r.boundary == "interior"
    assert abs(r.f1) < 1e-8
    assert abs(r.f2) < 1e-8
    start = RIDGE.value(r.continuous_b + 1.0)
    mean = r.end_of_cycle_penalty - r.f2
    scale = max(abs(start), abs(mean), abs(r.end_of_cycle_penalty))
    assert abs(start - r.end_of_cycle_penalty) < 1e-6 * scale
    assert abs(mean - r.end_of_cycle_penalty) < 1e-6 * scale


def test_bimodal_small_n_keeps_positive_staleness():
    assert optimize(BIMODAL, 5).b_star > 0


def test_quadratic_staleness_nonincreasing_in_n():
    bigq = make_goal([0.0], [[16.0e6, -8000.0, 1.0]])  # (delta - 4000)^2
    stars = [optimize(bigq, n).b_star for n in (500, 1500, 2500)]
    assert stars == sorted(stars, reverse=True)


def test_tau_grid_pins_tau():
    r = optimize(QUAD, 25, opts=OptimizerOptions(tau_grid=(0.1, 0.2)))
    assert r.tau_star in (0.1, 0.2)


def test_unknown_policy_rejected():
    with pytest.raises(ValueError, match="unknown policy"):
        optimize(QUAD, 5, policy="CSMA")


# -- brute-force reference -------------------------------------------------


def test_optimize_matches_brute_force_on_small_instance():
    taus = tuple(np.linspace(0.02, 0.5, 25))
    ranges = BruteForceRanges(
        b=tuple(range(0, 13)), gamma=tuple(range(0, 41)), tau=taus
    )
    bf = brute_force_reference(QUAD, 10, 1.0, ranges)
    pinned = optimize(QUAD, 10, opts=OptimizerOptions(tau_grid=taus))
    assert abs(bf.b_star - pinned.b_star) <= 1
    assert abs(bf.gamma_star - pinned.gamma_star) <= 1
    assert abs(bf.tau_star - pinned.tau_star) <= 0.02 + 1e-12
    assert abs(bf.L_star - pinned.L_star) <= 1e-3 * abs(bf.L_star)
    # freeing tau can only improve the optimum
    assert optimize(QUAD, 10).L_star <= bf.L_star * (1 + 1e-3)


def test_brute_force_flat_goal_tie_breaks_low():
    ranges = BruteForceRanges(
        b=(0, 1, 2), gamma=(0, 1, 2), tau=(0.1, 0.2, 0.3)
    )
    bf = brute_force_reference(CONST, 5, 1.0, ranges)
    assert (bf.b_star, bf.gamma_star, bf.tau_star) == (0, 0, 0.1)
    assert bf.L_star == 7.0


def test_brute_force_refuses_oversized_grid():
    ranges = BruteForceRanges(
        b=tuple(range(1000)), gamma=tuple(range(1000)), tau=tuple(range(11))
    )
    with pytest.raises(ValueError, match="refuses"):
        brute_force_reference(QUAD, 5, 1.0, ranges)


# -- corollary-2 diagnostic ------------------------------------------------


def test_window_contains_minimizer_for_centered_quadratic():
    r = optimize(QUAD, 20)
    rep = corollary2_diagnostic(r, QUAD)
    assert r.corollary2 == "contains minimizer"
    assert rep.flag == "contains minimizer"
    assert rep.minimizers == (5.0,)


def test_window_excludes_minimizer_on_cliff_goal():
    r = optimize(CLIFF, 20)
    rep = corollary2_diagnostic(r, CLIFF)
    assert r.corollary2 == "excluded"
    assert rep.flag == "excluded"
    assert rep.window[0] == 100.0


def test_diagnostic_inapplicable_for_flat_goal():
    r = optimize(CONST, 15)
    rep = corollary2_diagnostic(r, CONST)
    assert r.corollary2 == "inapplicable"
    assert rep.flag == "inapplicable"
