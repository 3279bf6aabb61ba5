"""Seeded Monte Carlo simulation of n nodes on the slotted collision channel.

The slot loop lives in a kernel with two interchangeable implementations: a
compiled extension (gora._simcore, built from Cython) and a pure-Python
reference (gora._simcore_py). They consume identical per-node PCG64
substreams and produce bit-identical outputs; the compiled one is selected
automatically when present.

Randomness contract, fixed so success-event digests reproduce everywhere:
node i draws from PCG64 seeded with SeedSequence(seed).spawn(n)[i], one
double per slot in which the node is active, nothing else ever touches the
streams. The per-slot goal penalty is derived after the run from the
success log alone: between successes a node's discrete age climbs linearly,
so each cycle's penalty collapses to one difference of the goal's exact
antiderivative instead of a per-slot sum.
"""

from __future__ import annotations

import gzip
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import _simcore_py
from .goal import GoalFunction
from .renewal import PolicyParams, steady_state_ps

try:
    from . import _simcore
    _DEFAULT_KERNEL = "compiled"
except ImportError:
    _simcore = None
    _DEFAULT_KERNEL = "python"


def available_kernels():
    kernels = ["python"]
    if _simcore is not None:
        kernels.insert(0, "compiled")
    return kernels


def _kernel_fn(name):
    if name == "auto":
        name = _DEFAULT_KERNEL
    if name == "compiled":
        if _simcore is None:
            raise RuntimeError("compiled kernel is not built; use kernel='python'")
        return _simcore.run_kernel, "compiled"
    if name == "python":
        return _simcore_py.run_kernel, "python"
    raise ValueError(f"unknown kernel {name!r}")


@dataclass(frozen=True)
class SimConfig:
    """One simulation run: n nodes under a policy, horizon slots of which
    the first warmup are discarded from every statistic except the success
    log. b and gamma must be whole slots here; the continuous relaxation
    exists only in the analytical layer."""

    n: int
    policy: PolicyParams
    horizon: int
    warmup: int = 0
    seed: int = 0
    trace_window: int = 1000
    initial_ages: str = "all_active"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be >= 1, got {self.n}")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError(
                f"need horizon > warmup >= 0, got horizon={self.horizon}, "
                f"warmup={self.warmup}"
            )
        for name in ("b", "gamma"):
            v = getattr(self.policy, name)
            if v != int(v):
                raise ValueError(f"simulation needs integer {name}, got {v}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.trace_window < 1:
            raise ValueError("trace window must be >= 1 slot")
        if self.initial_ages != "all_active":
            raise ValueError(f"unknown initial-age rule {self.initial_ages!r}")


@dataclass(frozen=True)
class SimStats:
    """Measured-region statistics of one run.

    time_avg_penalty averages the per-slot goal penalty over measured slots
    and nodes. empirical_ps counts successes per node-active slot. stderr is
    a regenerative estimate over complete renewals. aoi_histogram[k] counts
    node-slots spent at discrete age k; active_count_histogram[m] counts
    measured slots with m active nodes. success_event_digest hashes the full
    success log for equivalence testing.
    """

    time_avg_penalty: float
    empirical_ps: float
    stderr: float
    renewals: int
    successes: int
    measured_slots: int
    no_success_warning: bool
    success_event_digest: str
    active_count_histogram: np.ndarray = field(repr=False)
    aoi_histogram: np.ndarray = field(repr=False)
    window_successes: np.ndarray = field(repr=False)
    window_active: np.ndarray = field(repr=False)
    trace_window: int
    kernel: str


def spawn_bit_generators(seed, n):
    """The fixed per-node substream rule: SeedSequence(seed).spawn(n)."""
    return [np.random.PCG64(child) for child in np.random.SeedSequence(seed).spawn(n)]


def success_digest(success_slots, winners):
    """SHA-256 of the success log, packed little-endian (slots i8, winners i4)."""
    blob = success_slots.astype("<i8").tobytes() + winners.astype("<i4").tobytes()
    return hashlib.sha256(blob).hexdigest()


def _runs_from_log(n, gamma, horizon, success_slots, winners):
    """Decompose the success log into per-node age runs.

    A run is the slot range (prev, end] over which a node's age climbs
    b+1, b+2, ...; it ends either at the node's next success slot
    (success=True) or at the horizon. The virtual success at -(gamma+1)
    reproduces the all-active initial state.
    """
    virtual = -(gamma + 1)
    order = np.lexsort((success_slots, winners))
    sl = success_slots[order]
    ws = winners[order]
    same = np.empty(len(sl), bool)
    if len(sl):
        same[0] = False
        same[1:] = ws[1:] == ws[:-1]
    prev_s = np.where(same, np.concatenate(([0], sl[:-1])), virtual)
    last_of = np.full(n, virtual, np.int64)
    last_of[ws] = sl
    prev = np.concatenate((prev_s, last_of))
    end = np.concatenate((sl, np.full(n, horizon - 1, np.int64)))
    ended_by_success = np.concatenate(
        (np.ones(len(sl), bool), np.zeros(n, bool))
    )
    return prev, end, ended_by_success


def _penalty_from_runs(h, d, b, prev, end, warmup, horizon):
    """Exact penalty sum and age histogram over the measured region.

    Over one run the ages b+(lo-prev)..b+(hi-prev) each last one slot, so
    the penalty sum telescopes to a difference of the antiderivative of h.
    """
    lo = np.maximum(prev + 1, warmup)
    hi = end
    keep = lo <= hi
    lo, hi, prev = lo[keep], hi[keep], prev[keep]
    age_lo = b + (lo - prev)
    age_hi = b + (hi - prev)
    total = float(
        np.sum(h.cumulatives((age_hi + 1.0) * d) - h.cumulatives(age_lo * d)) / d
    )
    diff = np.zeros(int(age_hi.max()) + 2 if len(age_hi) else 1, np.int64)
    np.add.at(diff, age_lo, 1)
    np.add.at(diff, age_hi + 1, -1)
    aoi_hist = np.cumsum(diff)[:-1]
    return total, aoi_hist


def _regenerative_stderr(h, d, b, prev, end, ended_by_success, warmup):
    """Ratio-estimator standard error over complete measured renewals."""
    complete = ended_by_success & (prev >= max(0, warmup - 1))
    if not complete.any():
        return 0.0, 0
    x = (end[complete] - prev[complete]).astype(float)
    start = (b + 1.0) * d
    rewards = (h.cumulatives((b + x + 1.0) * d) - h.cumulative(start)) / d
    ratio = rewards.sum() / x.sum()
    resid = rewards - ratio * x
    return float(np.sqrt(np.sum(resid**2)) / x.sum()), int(complete.sum())


def run(config: SimConfig, h: GoalFunction, kernel="auto", event_log=None) -> SimStats:
    """Simulate one configuration and reduce the log to SimStats.

    event_log, when given, streams one `slot,event,winner` line per slot to
    that path (gzip-compressed iff the name ends in .gz).
    """
    fn, kernel_name = _kernel_fn(kernel)
    p = config.policy
    b, gamma = int(p.b), int(p.gamma)
    out = fn(
        spawn_bit_generators(config.seed, config.n),
        config.n, b, gamma, p.tau,
        config.horizon, config.warmup, config.trace_window,
        False, event_log is not None,
    )
    if event_log is not None:
        write_event_log(event_log, out["events"], out["success_slots"], out["winners"])

    measured = config.horizon - config.warmup
    s_slots, winners = out["success_slots"], out["winners"]
    meas_successes = int(np.count_nonzero(s_slots >= config.warmup))
    prev, end, by_success = _runs_from_log(
        config.n, gamma, config.horizon, s_slots, winners
    )
    total, aoi_hist = _penalty_from_runs(
        h, p.d, b, prev, end, config.warmup, config.horizon
    )
    stderr, renewals = _regenerative_stderr(
        h, p.d, b, prev, end, by_success, config.warmup
    )
    active_slots = int(out["window_active"].sum())
    return SimStats(
        time_avg_penalty=total / (config.n * measured),
        empirical_ps=meas_successes / active_slots if active_slots else 0.0,
        stderr=stderr,
        renewals=renewals,
        successes=meas_successes,
        measured_slots=measured,
        no_success_warning=meas_successes == 0,
        success_event_digest=success_digest(s_slots, winners),
        active_count_histogram=out["hist_m"],
        aoi_histogram=aoi_hist,
        window_successes=out["window_successes"],
        window_active=out["window_active"],
        trace_window=config.trace_window,
        kernel=kernel_name,
    )


def replay_ages(n, b, gamma, horizon, success_slots, winners):
    """Reference age updater: rebuild every node's per-slot age from the
    success log alone, one slot at a time. Deliberately naive; used to
    check the kernels' age bookkeeping."""
    last = [-(gamma + 1)] * n
    ages = np.empty((horizon, n), np.int64)
    by_slot = dict(zip(success_slots.tolist(), winners.tolist()))
    for slot in range(horizon):
        for i in range(n):
            ages[slot, i] = b + (slot - last[i])
        win = by_slot.get(slot)
        if win is not None:
            last[win] = slot
    return ages


@dataclass(frozen=True)
class ShiftCheck:
    """Outcome of the b-shift equivalence test."""

    passed: bool
    b_values: tuple
    first_divergence: str = ""


def shift_equivalence_check(config: SimConfig, b_values, kernel="auto") -> ShiftCheck:
    """Verify that b only relabels ages: same seed, same success digests,
    and age trajectories shifted by exactly b relative to the b=0 run."""
    fn, _ = _kernel_fn(kernel)
    p = config.policy

    def raw(b):
        return fn(
            spawn_bit_generators(config.seed, config.n),
            config.n, int(b), int(p.gamma), p.tau,
            config.horizon, config.warmup, config.trace_window,
            True, False,
        )

    base = raw(0)
    base_digest = success_digest(base["success_slots"], base["winners"])
    for b in b_values:
        other = raw(b)
        digest = success_digest(other["success_slots"], other["winners"])
        if digest != base_digest:
            return ShiftCheck(
                passed=False, b_values=tuple(b_values),
                first_divergence=f"success digest differs at b={b}",
            )
        delta = other["ages"] - base["ages"]
        if not (delta == int(b)).all():
            slot, node = np.argwhere(delta != int(b))[0]
            return ShiftCheck(
                passed=False, b_values=tuple(b_values),
                first_divergence=(
                    f"age of node {node} at slot {slot} is off by "
                    f"{delta[slot, node] - int(b)} at b={b}"
                ),
            )
    return ShiftCheck(passed=True, b_values=tuple(b_values))


@dataclass(frozen=True)
class StationarityReport:
    """Windowed success-probability diagnostics for one run."""

    windows: int
    ps_mean: float
    ps_cv: float
    drift_sigma: float
    drifting: bool
    insufficient: bool
    predicted_ps: float
    rel_dev_from_prediction: float

    @property
    def verdict(self):
        if self.insufficient:
            return "insufficient windows"
        return "drift" if self.drifting else "stationary"


def assumption1_report(stats: SimStats, config: SimConfig, window=None) -> StationarityReport:
    """Check that the per-window success probability stays flat.

    window (slots) defaults to a tenth of the measured region; it is
    rounded to a whole number of stored trace buckets. Drift is flagged
    when the linear-trend slope exceeds three of its standard errors.
    """
    p = config.policy
    predicted = steady_state_ps(config.n, p.tau, p.gamma).p_s
    if window is None:
        window = stats.measured_slots // 10
    k = max(1, int(round(window / stats.trace_window)))
    nb = len(stats.window_successes) // k
    if nb < 10:
        return StationarityReport(
            windows=nb, ps_mean=float("nan"), ps_cv=float("nan"),
            drift_sigma=float("nan"), drifting=False, insufficient=True,
            predicted_ps=predicted, rel_dev_from_prediction=float("nan"),
        )
    succ = stats.window_successes[: nb * k].reshape(nb, k).sum(axis=1)
    act = stats.window_active[: nb * k].reshape(nb, k).sum(axis=1)
    ps = np.divide(succ, act, out=np.zeros(nb), where=act > 0)
    mean = float(ps.mean())
    cv = float(ps.std(ddof=1) / mean) if mean > 0 else float("inf")
    x = np.arange(nb, dtype=float)
    sxx = float(np.sum((x - x.mean()) ** 2))
    slope = float(np.sum((x - x.mean()) * (ps - ps.mean())) / sxx)
    resid = ps - (ps.mean() + slope * (x - x.mean()))
    se = float(np.sqrt(np.sum(resid**2) / (nb - 2) / sxx)) if nb > 2 else float("inf")
    sigma = abs(slope) / se if se > 0 else 0.0
    return StationarityReport(
        windows=nb, ps_mean=mean, ps_cv=cv,
        drift_sigma=sigma, drifting=sigma > 3.0, insufficient=False,
        predicted_ps=predicted,
        rel_dev_from_prediction=abs(mean - predicted) / predicted,
    )


_EVENT_NAMES = ("idle", "success", "collision")


def write_event_log(path, events, success_slots, winners):
    """Write one `slot,event,winner` line per slot; gzip iff path ends .gz."""
    win_by_slot = dict(zip(success_slots.tolist(), winners.tolist()))
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "wt", encoding="ascii") as fh:
        for slot, code in enumerate(events.tolist()):
            winner = win_by_slot.get(slot, "")
            fh.write(f"{slot},{_EVENT_NAMES[code]},{winner}\n")
