"""Independent numerical oracles used to freeze expected test values.

Everything here is deliberately naive and separate from the package code:
adaptive Simpson quadrature instead of exact antiderivatives, central
differences instead of analytical derivatives, and Monte Carlo instead of
series summation. Tests compare the fast implementations against these.
"""

from __future__ import annotations

import numpy as np


def simpson(f, a, b, tol=1e-10, depth=50):
    """Adaptive Simpson integral of f over [a, b]."""

    def simp(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simp(fa, flm, fm, a, m)
        right = simp(fm, frm, fb, m, b)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    if a == b:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simp(fa, fm, fb, a, b), tol, depth)


def piecewise_simpson(f, a, b, knots, tol=1e-10):
    """Simpson integral split at the interior knots so kinks never hurt."""
    pts = [a] + [k for k in sorted(knots) if a < k < b] + [b]
    return sum(simpson(f, lo, hi, tol) for lo, hi in zip(pts, pts[1:]))


def central_difference(f, x, h=1e-5):
    """Fourth-order central difference of f at x."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h)


def grid_argmin(f, lo, hi, n=2_000_001):
    """Dense-grid scan for the minimiser set of f on [lo, hi]."""
    xs = np.linspace(lo, hi, n)
    ys = np.array([f(x) for x in xs]) if not callable(getattr(f, "values", None)) else f.values(xs)
    vmin = ys.min()
    return xs[ys <= vmin + 1e-9 * max(1.0, abs(vmin))], vmin


def geometric_cycle_average(h_integral, p_s, b, gamma, d, n_samples, seed):
    """Monte Carlo estimate of the stationary cycle-average penalty.

    Samples the geometric slot count Y directly and averages the exact
    per-cycle integral, dividing by the mean cycle length. h_integral(a, b)
    must return the exact integral of the goal over [a, b]. Samples are
    grouped by their (integer) value of Y so the integral is evaluated once
    per distinct outcome; the estimator is unchanged.
    """
    rng = np.random.default_rng(seed)
    y = rng.geometric(p_s, n_samples)
    uniq, counts = np.unique(y, return_counts=True)
    integrals = np.array(
        [h_integral((b + 1) * d, (b + gamma + yi + 1) * d) for yi in uniq]
    )
    lengths = (gamma + uniq) * d
    num_mean = counts @ integrals / n_samples
    den_mean = counts @ lengths / n_samples
    est = num_mean / den_mean
    # Regenerative-process standard error for a ratio estimator.
    resid_sq = counts @ (integrals - est * lengths) ** 2 / n_samples
    stderr = np.sqrt(resid_sq / n_samples) / den_mean
    return est, stderr
