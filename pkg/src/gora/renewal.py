"""Stationary analysis of the silence/contention cycle on a shared slot channel.

Between two successful deliveries a node sits out gamma back-off slots and
then contends for a geometric number Y of slots (per-slot success
probability p_s), while the receiver-side age of its freshest sample sweeps
from (b+1)d to (b+gamma+Y+1)d. Averaging the goal penalty over that sweep
and over Y yields the stationary time-average penalty; its partial
derivatives in b and gamma collapse to the two residuals exposed here, and
the second derivatives to the closed-form Hessian entries.

All expectations over Y are truncated sums controlled by SeriesControl;
p_s is held fixed while differentiating (re-coupling p_s to gamma is the
optimizer's concern).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .goal import GoalFunction

# Chunk length for vectorised series accumulation; bounds peak memory.
_CHUNK = 1 << 18

# Development hook: when set to a nonzero float the cross Hessian entry is
# scaled by (1 + value), so consistency checks must catch the corruption.
_HESSIAN_MUTATION = None


class ConvergenceError(RuntimeError):
    """An iterative solve failed to settle within its iteration budget."""


class PrecisionError(RuntimeError):
    """A truncated series cannot reach the requested accuracy."""


class NonSmoothError(ValueError):
    """A derivative was requested where the goal function has a kink."""


@dataclass(frozen=True)
class PolicyParams:
    """Access-policy parameters: staleness b, transmit probability tau,
    back-off gamma (slots; real-valued in the continuous relaxation) and
    slot duration d."""

    b: float
    tau: float
    gamma: float
    d: float = 1.0

    def __post_init__(self):
        if self.b < 0:
            raise ValueError(f"staleness b must be >= 0, got {self.b}")
        if self.gamma < 0:
            raise ValueError(f"back-off gamma must be >= 0, got {self.gamma}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"transmit probability must lie in (0,1), got {self.tau}")
        if self.d <= 0:
            raise ValueError(f"slot duration must be > 0, got {self.d}")


@dataclass(frozen=True)
class ChannelModel:
    """Steady-state channel seen by one node.

    mode records where p_s came from: solved self-consistently
    (fixed_point), supplied by the caller (external), or measured by the
    simulator (empirical).
    """

    n: int
    tau: float
    gamma: float
    p_s: float
    m_hat: float
    mode: str = "fixed_point"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"transmit probability must lie in (0,1), got {self.tau}")
        if self.gamma < 0:
            raise ValueError(f"back-off gamma must be >= 0, got {self.gamma}")
        if not 0.0 < self.p_s <= 1.0:
            raise ValueError(f"success probability must lie in (0,1], got {self.p_s}")
        if not 1.0 - 1e-9 <= self.m_hat <= self.n + 1e-9:
            raise ValueError(f"active-node estimate {self.m_hat} outside [1, {self.n}]")
        if self.mode not in ("fixed_point", "external", "empirical"):
            raise ValueError(f"unknown channel mode {self.mode!r}")
        if self.mode == "fixed_point":
            want = success_prob_instant(self.tau, max(self.m_hat, 1.0))
            if abs(self.p_s - want) > 1e-10:
                raise ValueError(
                    "fixed_point channel is not self-consistent: "
                    f"p_s={self.p_s} vs {want}"
                )

    @property
    def mean_sojourn(self):
        """Expected number of contention slots per cycle, E[Y] = 1/p_s."""
        return 1.0 / self.p_s


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for expectations over the geometric sojourn Y.

    The series is cut at y_max = ceil(ln tail_mass / ln(1-p_s)), so the
    probability mass beyond the cut is at most tail_mass.
    """

    tail_mass: float = 1e-12
    max_terms: int = 20_000_000

    def __post_init__(self):
        if not 0.0 < self.tail_mass < 1.0:
            raise ValueError(f"tail mass must lie in (0,1), got {self.tail_mass}")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")

    def truncation_index(self, p_s):
        if not 0.0 < p_s <= 1.0:
            raise ValueError(f"success probability must lie in (0,1], got {p_s}")
        if p_s == 1.0:
            return 1
        y_max = max(1, math.ceil(math.log(self.tail_mass) / math.log1p(-p_s)))
        if y_max > self.max_terms:
            raise PrecisionError(
                f"series needs {y_max} terms for tail mass {self.tail_mass} at "
                f"p_s={p_s}, above the {self.max_terms} cap"
            )
        return y_max


@dataclass(frozen=True)
class CycleStats:
    """Everything one truncated series pass yields about a policy point.

    value is the stationary time-average penalty L. residual_b is
    E[h(end-of-cycle age)] - h(start age); residual_gamma is the same
    expectation minus L. Both vanish at an interior optimum of L. The tail_*
    fields estimate (by continued summation) what truncation chopped off
    value, end_penalty_mean and end_slope_mean respectively.
    """

    value: float
    residual_b: float
    residual_gamma: float
    end_penalty_mean: float
    end_slope_mean: float
    start_penalty: float
    start_slope: float
    mean_cycle_slots: float
    y_max: int
    tail_value: float
    tail_end_penalty: float
    tail_end_slope: float


@dataclass(frozen=True)
class PenaltyReport:
    """Truncated stationary penalty plus its truncation-tail estimate."""

    value: float
    tail_bound: float
    y_max: int

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class HessianResult:
    """Second derivatives of the penalty in (b, gamma) at fixed p_s."""

    d2l_db2: float
    d2l_dbdgamma: float
    d2l_dgamma2: float
    det: float
    convex: bool
    verdict: str


def success_prob_instant(tau, m):
    """Per-node success probability with m active contenders: the node
    transmits and the other m-1 hold back."""
    if m < 1:
        raise ValueError(f"active-node count must be >= 1, got {m}")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"transmit probability must lie in (0,1), got {tau}")
    return tau * (1.0 - tau) ** (m - 1.0)


def steady_state_ps(n, tau, gamma, tol=1e-12):
    """Solve the self-consistent steady state of the contention channel.

    A node is active for E[Y] = 1/p_s of every gamma + E[Y] cycle slots, so
    the expected active count is m_hat = n / (1 + gamma * p_s), while p_s
    itself is the success probability against m_hat - 1 rivals. The damped
    fixed-point iteration below starts from the all-active state and
    increases monotonically, so it lands on the smallest solution, the one
    a simulation started with all nodes active relaxes to.
    """
    if n < 1 or n != int(n):
        raise ValueError(f"node count must be a positive integer, got {n}")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"transmit probability must lie in (0,1), got {tau}")
    if gamma < 0:
        raise ValueError(f"back-off gamma must be >= 0, got {gamma}")
    n = int(n)

    def recompute(p):
        m = max(n / (1.0 + gamma * p), 1.0)
        return success_prob_instant(tau, m)

    p = success_prob_instant(tau, n)
    if p == 0.0:
        raise PrecisionError(
            f"all-active success probability underflows for n={n}, tau={tau}"
        )
    if n == 1 or gamma == 0.0:
        # p_s does not feed back on itself: all nodes stay active.
        return ChannelModel(n=n, tau=tau, gamma=gamma, p_s=p, m_hat=float(n))

    # In exact arithmetic the damped iterates increase monotonically toward
    # the smallest root; in floats they can enter a tiny rounding-noise
    # cycle, so a stall (no progress over a window) also ends the loop and
    # hands the iterate to the polish below.
    stall = 0
    for _ in range(100_000):
        p_next = 0.5 * (p + recompute(p))
        delta = abs(p_next - p)
        p = p_next
        if delta < tol:
            break
        stall = stall + 1 if delta < 1e-7 * p else 0
        if stall >= 16:
            break
    else:
        raise ConvergenceError(
            "steady-state success probability did not settle after 100000 "
            f"iterations (tau={tau}, gamma={gamma}, last p_s={p})"
        )
    # Newton polish so p_s and m_hat agree to machine precision, not just
    # to the iteration tolerance; matters when n * gamma is large.
    for _ in range(8):
        m = n / (1.0 + gamma * p)
        if m <= 1.0:
            p = tau
            break
        f = success_prob_instant(tau, m)
        fprime = f * math.log1p(-tau) * (-n * gamma / (1.0 + gamma * p) ** 2)
        gprime = 1.0 - fprime
        if gprime <= 0.0:
            break
        p_new = p - (p - f) / gprime
        if not 0.0 < p_new < 1.0:
            break
        step_small = abs(p_new - p) < 1e-16 * p
        p = p_new
        if step_small:
            break
    if abs(p - recompute(p)) > 1e-10:
        # Newton degenerates near a fold of the fixed-point curve; bisect
        # between the (monotone, hence lower-bound) iterate and the first
        # point where the map crosses back.
        lo = p
        hi = None
        step = max(1e-9 * p, 1e-18)
        for _ in range(80):
            cand = lo + step
            if cand >= 1.0 or recompute(cand) <= cand:
                hi = min(cand, 1.0 - 1e-16)
                break
            step *= 2.0
        if hi is None or recompute(hi) > hi:
            raise ConvergenceError(
                f"fixed point at tau={tau}, gamma={gamma} sits on a fold; "
                f"no self-consistent p_s beyond {lo}"
            )
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if recompute(mid) > mid:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-17 * hi:
                break
        p = hi
    m_hat = max(n / (1.0 + gamma * p), 1.0)
    return ChannelModel(n=n, tau=tau, gamma=gamma, p_s=success_prob_instant(tau, m_hat), m_hat=m_hat)


def external_ps(n, tau, gamma, p_s, mode="external"):
    """Channel model around a caller-supplied (or measured) p_s."""
    m_hat = min(max(n / (1.0 + gamma * p_s), 1.0), float(n))
    return ChannelModel(n=n, tau=tau, gamma=gamma, p_s=p_s, m_hat=m_hat, mode=mode)


def _weighted_sums(h, c_start, p, p_s, log_q, y_lo, y_hi):
    """Accumulate the three weighted series over y in [y_lo, y_hi].

    Returns (sums, w_last) where sums stacks
    sum w_y * integral_{start}^{end_y} h, sum w_y h(end_y),
    sum w_y h'(end_y), with w_y = p_s (1-p_s)^(y-1) and
    end_y = (b + gamma + y + 1) d.
    """
    sums = np.zeros(3)
    w_last = 0.0
    for lo in range(y_lo, y_hi + 1, _CHUNK):
        hi = min(lo + _CHUNK - 1, y_hi)
        y = np.arange(lo, hi + 1, dtype=float)
        w = p_s * np.exp((y - 1.0) * log_q)
        ends = (p.b + p.gamma + y + 1.0) * p.d
        cum, val, slo = h.series_terms(ends)
        sums[0] += float(np.dot(w, cum - c_start))
        sums[1] += float(np.dot(w, val))
        sums[2] += float(np.dot(w, slo))
        w_last = float(w[-1])
        if w_last == 0.0:
            break
    return sums, w_last


def cycle_stats(h: GoalFunction, p: PolicyParams, ch: ChannelModel, s=None) -> CycleStats:
    """One series pass computing the penalty, both residuals and tails."""
    s = s if s is not None else SeriesControl()
    p_s = ch.p_s
    y_max = s.truncation_index(p_s)
    start = (p.b + 1.0) * p.d
    c_start = h.cumulative(start)
    phi = p.gamma + 1.0 / p_s

    if h.is_flat():
        # constant goal: every moment is the constant, exactly; the series
        # would only add truncation dust
        c = h.value(start)
        return CycleStats(
            value=c, residual_b=0.0, residual_gamma=0.0,
            end_penalty_mean=c, end_slope_mean=0.0,
            start_penalty=c, start_slope=0.0,
            mean_cycle_slots=phi, y_max=0,
            tail_value=0.0, tail_end_penalty=0.0, tail_end_slope=0.0,
        )
    if p_s == 1.0:
        end = (p.b + p.gamma + 2.0) * p.d
        main = np.array([h.integral(start, end), h.value(end), h.slope(end)])
        tail = np.zeros(3)
    else:
        log_q = math.log1p(-p_s)
        main, w_last = _weighted_sums(h, c_start, p, p_s, log_q, 1, y_max)
        # Estimate the chopped-off remainder from one further chunk. Chunk
        # sums shrink at least geometrically once the weight decay beats the
        # polynomial growth, so a single chunk plus the geometric top-up is
        # enough; otherwise keep summing until the weights die.
        tail = np.zeros(3)
        clen = max(256, y_max // 2)
        if w_last > 0.0:
            part, w_last = _weighted_sums(
                h, c_start, p, p_s, log_q, y_max + 1, y_max + clen
            )
            tail += part
            degp = h.max_degree + 1
            ratio = math.exp(clen * log_q) * (1.0 + clen / (y_max + 1.0)) ** degp
            if ratio < 0.5:
                tail += part * (ratio / (1.0 - ratio))
            else:
                y_lo, budget = y_max + clen + 1, y_max * 50 + 10_000
                while w_last > 0.0 and y_lo <= y_max + budget:
                    y_hi = min(y_lo + clen - 1, y_max + budget)
                    part, w_last = _weighted_sums(
                        h, c_start, p, p_s, log_q, y_lo, y_hi
                    )
                    tail += part
                    scale = np.abs(main) + np.abs(tail) + 1e-300
                    if np.all(np.abs(part) <= 1e-18 * scale):
                        break
                    y_lo = y_hi + 1

    denom = phi * p.d
    value = float(main[0] / denom)
    return CycleStats(
        value=value,
        residual_b=float(main[1] - h.value(start)),
        residual_gamma=float(main[1] - value),
        end_penalty_mean=float(main[1]),
        end_slope_mean=float(main[2]),
        start_penalty=float(h.value(start)),
        start_slope=float(h.slope(start)),
        mean_cycle_slots=phi,
        y_max=y_max,
        tail_value=float(tail[0] / denom),
        tail_end_penalty=float(tail[1]),
        tail_end_slope=float(tail[2]),
    )


def _check_precision(stats: CycleStats, s: SeriesControl):
    if abs(stats.tail_value) > 1e-6 * abs(stats.value):
        raise PrecisionError(
            f"series truncation tail {stats.tail_value} exceeds 1e-6 of the "
            f"penalty {stats.value}; retry with tail_mass below {s.tail_mass}"
        )


def expected_penalty(h, p, ch, s=None) -> PenaltyReport:
    """Stationary time-average penalty of policy p on channel ch."""
    s = s if s is not None else SeriesControl()
    stats = cycle_stats(h, p, ch, s)
    _check_precision(stats, s)
    return PenaltyReport(value=stats.value, tail_bound=stats.tail_value, y_max=stats.y_max)


def residual_b(h, p, ch, s=None):
    """Stationarity residual in b: E[h(end-of-cycle age)] - h(start age).

    Equals (dL/db) * (gamma + E[Y]); zero at an interior optimum over b.
    """
    s = s if s is not None else SeriesControl()
    stats = cycle_stats(h, p, ch, s)
    _check_precision(stats, s)
    return stats.residual_b


def residual_gamma(h, p, ch, s=None):
    """Stationarity residual in gamma: E[h(end-of-cycle age)] - L.

    Equals (dL/dgamma) * (gamma + E[Y]); zero at an interior optimum over
    gamma.
    """
    s = s if s is not None else SeriesControl()
    stats = cycle_stats(h, p, ch, s)
    _check_precision(stats, s)
    return stats.residual_gamma


def _kink_guard(h: GoalFunction, p: PolicyParams, y_max):
    """Reject evaluation points sitting on a non-differentiable kink."""
    kinks = [
        bp
        for bp in h.breakpoints[1:]
        if abs(h.one_sided_slopes(bp)[0] - h.one_sided_slopes(bp)[1])
        > 1e-9 * max(1.0, abs(h.one_sided_slopes(bp)[1]))
    ]
    if not kinks:
        return
    start = (p.b + 1.0) * p.d
    for bp in kinks:
        if abs(start - bp) < 1e-9:
            raise NonSmoothError(
                f"penalty derivative undefined: cycle-start age {start} sits on "
                f"the kink at {bp}"
            )
        # end-of-cycle ages form the arithmetic sequence (b+gamma+1+y)d
        y_star = bp / p.d - (p.b + p.gamma + 1.0)
        y_near = round(y_star)
        if 1 <= y_near <= y_max and abs(y_star - y_near) * p.d < 1e-9:
            raise NonSmoothError(
                f"penalty derivative undefined: cycle-end age for y={y_near} "
                f"sits on the kink at {bp}"
            )


def hessian(h, p, ch, s=None) -> HessianResult:
    """Closed-form second derivatives of the penalty at fixed p_s.

    With phi = gamma + E[Y], T = E[h'(end-of-cycle age)] and the residuals
    F1, F2 of residual_b / residual_gamma:

        d2L/db2       = d (T - h'(start)) / phi
        d2L/db dgamma = d T / phi - F1 / phi^2
        d2L/dgamma2   = d T / phi - 2 F2 / phi^2
    """
    s = s if s is not None else SeriesControl()
    if h.is_flat():
        # a constant goal makes L constant in (b, gamma); the series would
        # only report truncation dust here
        return HessianResult(
            d2l_db2=0.0, d2l_dbdgamma=0.0, d2l_dgamma2=0.0, det=0.0,
            convex=False, verdict="not positive definite (flat)",
        )
    stats = cycle_stats(h, p, ch, s)
    _check_precision(stats, s)
    _kink_guard(h, p, stats.y_max)
    phi = stats.mean_cycle_slots
    t = stats.end_slope_mean
    if h.max_degree <= 1 and len(h.pieces) == 1:
        # globally linear goal: end and start slopes agree identically, so
        # the curvature in b is zero rather than truncation dust
        l_bb = 0.0
    else:
        l_bb = p.d * (t - stats.start_slope) / phi
    l_bg = p.d * t / phi - stats.residual_b / phi**2
    l_gg = p.d * t / phi - 2.0 * stats.residual_gamma / phi**2
    if _HESSIAN_MUTATION:
        l_bg = l_bg * (1.0 + _HESSIAN_MUTATION)
    det = l_bb * l_gg - l_bg**2
    if l_bb > 0.0 and det > 0.0:
        convex, verdict = True, "positive definite"
    elif l_bb == 0.0 and det == 0.0:
        convex, verdict = False, "not positive definite (flat)"
    else:
        convex, verdict = False, "not positive definite"
    return HessianResult(
        d2l_db2=l_bb, d2l_dbdgamma=l_bg, d2l_dgamma2=l_gg, det=det,
        convex=convex, verdict=verdict,
    )
