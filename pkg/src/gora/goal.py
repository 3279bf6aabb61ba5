"""Piecewise-polynomial penalty functions of information age.

A goal function maps the age of the freshest delivered sample to a task
penalty. Keeping it piecewise polynomial makes evaluation, differentiation
and integration exact, so no quadrature error enters the analytical layer.

Coefficients are in ascending power order and expressed in absolute age
(not relative to the piece start). Piece j governs [breakpoints[j],
breakpoints[j+1]); the last piece extends to infinity. At a breakpoint the
right-hand piece governs, so derivatives at kinks are right-hand values.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 6

# Relative tolerance for the continuity check at breakpoints.
_CONTINUITY_RTOL = 1e-9


class GoalFunctionError(ValueError):
    """A goal function violates a construction invariant."""


class GoalDomainError(ValueError):
    """An evaluation point lies outside [0, inf)."""


def _trim(coeffs):
    """Drop trailing zero coefficients, keeping at least one entry."""
    c = list(coeffs)
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(float(v) for v in c)


def _polyval(coeffs, x):
    """Horner evaluation; works for scalars and numpy arrays."""
    acc = coeffs[-1] * (x * 0 + 1.0) if not np.isscalar(x) else coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def _polyder(coeffs):
    if len(coeffs) == 1:
        return (0.0,)
    return _trim(tuple(m * c for m, c in enumerate(coeffs) if m >= 1))


def _polyint(coeffs):
    """Antiderivative with zero constant term."""
    return (0.0,) + tuple(c / (m + 1) for m, c in enumerate(coeffs))


@dataclass(frozen=True)
class ArgminResult:
    """Locations of the goal-function minimum over [0, inf)."""

    points: tuple
    min_value: float
    flat: bool = False


@dataclass(frozen=True, eq=False)
class GoalFunction:
    breakpoints: tuple
    pieces: tuple

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        if not bps:
            raise GoalFunctionError("at least one breakpoint required")
        if bps[0] != 0.0:
            raise GoalFunctionError("first breakpoint must be 0")
        if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise GoalFunctionError("breakpoints must be strictly ascending")
        if len(self.pieces) != len(bps):
            raise GoalFunctionError(
                f"need one piece per breakpoint: {len(self.pieces)} pieces "
                f"for {len(bps)} breakpoints"
            )
        if any(len(p) == 0 for p in self.pieces):
            raise GoalFunctionError("every piece needs at least one coefficient")
        pieces = tuple(_trim(p) for p in self.pieces)
        for p in pieces:
            if not all(np.isfinite(c) for c in p):
                raise GoalFunctionError("coefficients must be finite")
            if len(p) - 1 > MAX_DEGREE:
                raise GoalFunctionError(
                    f"piece degree {len(p) - 1} exceeds the maximum {MAX_DEGREE}"
                )
        # Continuity at interior breakpoints (right piece takes over exactly
        # where the left one stops).
        for j in range(1, len(bps)):
            left = _polyval(pieces[j - 1], bps[j])
            right = _polyval(pieces[j], bps[j])
            if abs(left - right) > _CONTINUITY_RTOL * max(1.0, abs(left), abs(right)):
                raise GoalFunctionError(
                    f"discontinuous at breakpoint {bps[j]}: {left} vs {right}"
                )
        # The tail must eventually be non-decreasing, otherwise the truncated
        # penalty series has no controllable error bound.
        dtail = _polyder(pieces[-1])
        if dtail != (0.0,) and dtail[-1] <= 0.0:
            raise GoalFunctionError("tail not eventually non-decreasing")

        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "_deriv", tuple(_polyder(p) for p in pieces))
        anti = tuple(_polyint(p) for p in pieces)
        # Cumulative integral from 0 up to each breakpoint, so integral()
        # is a difference of one exact antiderivative function.
        cum = [0.0]
        for j in range(1, len(bps)):
            cum.append(
                cum[-1] + _polyval(anti[j - 1], bps[j]) - _polyval(anti[j - 1], bps[j - 1])
            )
        offsets = tuple(
            c - _polyval(a, b) for c, a, b in zip(cum, anti, bps)
        )
        object.__setattr__(self, "_anti", anti)
        object.__setattr__(self, "_anti_offsets", offsets)

    @property
    def max_degree(self):
        return max(len(p) - 1 for p in self.pieces)

    # -- scalar evaluation ------------------------------------------------

    def _piece_index(self, delta):
        if delta < 0:
            raise GoalDomainError(f"age must be >= 0, got {delta}")
        return min(bisect_right(self.breakpoints, delta) - 1, len(self.pieces) - 1)

    def value(self, delta):
        """Penalty at age delta."""
        return _polyval(self.pieces[self._piece_index(delta)], delta)

    def slope(self, delta):
        """Right-hand derivative of the penalty at age delta."""
        return _polyval(self._deriv[self._piece_index(delta)], delta)

    def cumulative(self, x):
        """Exact integral of the penalty from age 0 to x."""
        j = self._piece_index(x)
        return self._anti_offsets[j] + _polyval(self._anti[j], x)

    def integral(self, a, b):
        """Exact integral of the penalty over [a, b]."""
        if a < 0 or a > b:
            raise GoalDomainError(f"need 0 <= a <= b, got a={a}, b={b}")
        return self.cumulative(b) - self.cumulative(a)

    def slot_penalty(self, k, d):
        """Average penalty over the slot where the discrete age equals k."""
        if d <= 0:
            raise GoalDomainError(f"slot duration must be positive, got {d}")
        if k < 0 or k != int(k):
            raise GoalDomainError(f"discrete age must be a non-negative integer, got {k}")
        return self.integral(k * d, (k + 1) * d) / d

    # -- vectorised evaluation (hot paths in the renewal series) ----------

    def _indices(self, x):
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.minimum(idx, len(self.pieces) - 1)

    def _eval_by_piece(self, table, x):
        x = np.asarray(x, dtype=float)
        idx = self._indices(x)
        out = np.empty_like(x)
        for j, coeffs in enumerate(table):
            m = idx == j
            if m.any():
                out[m] = _polyval(coeffs, x[m])
        return out

    def values(self, x):
        return self._eval_by_piece(self.pieces, x)

    def slopes(self, x):
        return self._eval_by_piece(self._deriv, x)

    def cumulatives(self, x):
        x = np.asarray(x, dtype=float)
        idx = self._indices(x)
        out = np.empty_like(x)
        for j, coeffs in enumerate(self._anti):
            m = idx == j
            if m.any():
                out[m] = self._anti_offsets[j] + _polyval(coeffs, x[m])
        return out

    def series_terms(self, x):
        """(cumulatives, values, slopes) sharing one piece lookup."""
        x = np.asarray(x, dtype=float)
        if len(self.pieces) == 1:
            return (
                self._anti_offsets[0] + _polyval(self._anti[0], x),
                _polyval(self.pieces[0], x),
                _polyval(self._deriv[0], x),
            )
        idx = self._indices(x)
        cum = np.empty_like(x)
        val = np.empty_like(x)
        slo = np.empty_like(x)
        for j in range(len(self.pieces)):
            m = idx == j
            if m.any():
                xm = x[m]
                cum[m] = self._anti_offsets[j] + _polyval(self._anti[j], xm)
                val[m] = _polyval(self.pieces[j], xm)
                slo[m] = _polyval(self._deriv[j], xm)
        return cum, val, slo

    # -- minima ------------------------------------------------------------

    def is_flat(self):
        first = self.pieces[0]
        return all(p == first and len(p) == 1 for p in self.pieces)

    def one_sided_slopes(self, delta):
        """(left, right) derivative at delta; equal away from kinks."""
        j = self._piece_index(delta)
        right = _polyval(self._deriv[j], delta)
        jl = j
        if j > 0 and delta == self.breakpoints[j]:
            jl = j - 1
        left = _polyval(self._deriv[jl], delta)
        return left, right

    def argmin_set(self, tol=1e-9):
        """All ages achieving the minimum penalty within tol.

        Flat goals are flagged instead of returning every age. When the
        minimum is attained on a flat segment, the segment endpoints stand
        in for the (uncountable) interior.
        """
        if self.is_flat():
            return ArgminResult(points=(), min_value=self.pieces[0][0], flat=True)
        candidates = list(self.breakpoints)
        ext = list(self.breakpoints[1:]) + [None]
        for j, dcoeffs in enumerate(self._deriv):
            lo, hi = self.breakpoints[j], ext[j]
            if dcoeffs == (0.0,):
                continue
            roots = np.polynomial.polynomial.polyroots(dcoeffs)
            for r in roots:
                if abs(r.imag) > 1e-9 * (1.0 + abs(r.real)):
                    continue
                x = float(r.real)
                # Newton polish against float noise from the companion matrix.
                d2 = _polyder(dcoeffs)
                for _ in range(3):
                    fp = _polyval(dcoeffs, x)
                    fpp = _polyval(d2, x)
                    if fpp != 0.0:
                        x -= fp / fpp
                if x >= lo - 1e-12 and (hi is None or x < hi + 1e-12):
                    candidates.append(min(max(x, lo), hi if hi is not None else x))
        vals = [self.value(c) for c in candidates]
        vmin = min(vals)
        pts = sorted(c for c, v in zip(candidates, vals) if v <= vmin + tol)
        dedup = []
        for p in pts:
            if not dedup or p - dedup[-1] > 1e-9 * max(1.0, abs(p)):
                dedup.append(p)
        return ArgminResult(points=tuple(dedup), min_value=vmin, flat=False)


def make_goal(breakpoints, pieces) -> GoalFunction:
    """Validate and build a goal function from breakpoints and coefficients."""
    return GoalFunction(tuple(breakpoints), tuple(tuple(p) for p in pieces))


def from_records(records) -> GoalFunction:
    """Build a goal function from a list of {start_age, coefficients} records.

    This is the on-disk representation used by scenario files.
    """
    if not records:
        raise GoalFunctionError("goal declaration is empty")
    bps, pieces = [], []
    for rec in records:
        try:
            bps.append(float(rec["start_age"]))
            pieces.append(tuple(float(c) for c in rec["coefficients"]))
        except (KeyError, TypeError) as exc:
            raise GoalFunctionError(f"malformed goal record {rec!r}") from exc
    order = sorted(range(len(bps)), key=lambda i: bps[i])
    return make_goal([bps[i] for i in order], [pieces[i] for i in order])


# Functional aliases matching the operation names used elsewhere.

def evaluate(h: GoalFunction, delta):
    return h.value(delta)


def derivative(h: GoalFunction, delta):
    return h.slope(delta)


def integrate(h: GoalFunction, a, b):
    return h.integral(a, b)


def slot_penalty(h: GoalFunction, k, d):
    return h.slot_penalty(k, d)


def argmin_set(h: GoalFunction, tol=1e-9):
    return h.argmin_set(tol)
