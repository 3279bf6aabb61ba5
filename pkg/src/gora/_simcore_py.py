"""Pure-Python slot-loop kernel.

Reference implementation of the simulation inner loop; the compiled twin in
_simcore.pyx must produce bit-identical outputs. Shared contract:

- Node i's k-th uniform draw is the k-th double of its own PCG64 substream,
  consumed only on slots where the node is active. The activity schedule
  never depends on b, so draws line up exactly across different b.
- A success in slot l silences the winner for gamma whole slots (l+1 ..
  l+gamma); it contends again from slot l+gamma+1. gamma=0 keeps every node
  permanently active.
- The age of node i during slot l is b + (l - last_success[i]); the virtual
  last success at -(gamma+1) makes every node start active with age
  b+gamma+1.
- Counters (active-count histogram, per-window successes/opportunities)
  cover slots warmup..horizon-1; the success log covers all slots.
"""

import numpy as np

_BUF = 4096


class _NodeDraws:
    """Buffered per-node uniform stream; next() equals the bit generator's
    raw next_double sequence."""

    __slots__ = ("gen", "buf", "pos")

    def __init__(self, bitgen):
        self.gen = np.random.Generator(bitgen)
        self.buf = self.gen.random(_BUF)
        self.pos = 0

    def next(self):
        if self.pos == _BUF:
            self.buf = self.gen.random(_BUF)
            self.pos = 0
        u = self.buf[self.pos]
        self.pos += 1
        return u


def run_kernel(bitgens, n, b, gamma, tau, horizon, warmup, trace_window,
               record_ages=False, record_events=False):
    """Simulate horizon slots; see the module docstring for semantics.

    Returns a dict with the success log (slots, winners), measured-region
    counters, final per-node last-success slots and optional per-slot age /
    event recordings.
    """
    draws = [_NodeDraws(bg) for bg in bitgens]
    active = list(range(n))
    wheel_len = gamma + 2
    wheel = [[] for _ in range(wheel_len)]
    last_success = [-(gamma + 1)] * n

    measured = horizon - warmup
    n_windows = (measured + trace_window - 1) // trace_window
    hist_m = np.zeros(n + 1, np.int64)
    win_succ = np.zeros(n_windows, np.int64)
    win_act = np.zeros(n_windows, np.int64)
    cap = max(1024, horizon // 4)
    s_slots = np.empty(cap, np.int64)
    s_win = np.empty(cap, np.int32)
    n_succ = 0
    ages = np.empty((horizon, n), np.int64) if record_ages else None
    events = np.empty(horizon, np.int8) if record_events else None

    for slot in range(horizon):
        if gamma > 0:
            bucket = wheel[slot % wheel_len]
            if bucket:
                active.extend(bucket)
                bucket.clear()
        if record_ages:
            row = ages[slot]
            for i in range(n):
                row[i] = b + (slot - last_success[i])
        meas = slot >= warmup
        if meas:
            hist_m[len(active)] += 1
            win_act[(slot - warmup) // trace_window] += len(active)
        transmitters = 0
        winner = -1
        for i in active:
            if draws[i].next() < tau:
                transmitters += 1
                winner = i
        if transmitters == 1:
            if n_succ == cap:
                cap *= 2
                s_slots = np.resize(s_slots, cap)
                s_win = np.resize(s_win, cap)
            s_slots[n_succ] = slot
            s_win[n_succ] = winner
            n_succ += 1
            if meas:
                win_succ[(slot - warmup) // trace_window] += 1
            last_success[winner] = slot
            if gamma > 0:
                active.remove(winner)
                wheel[(slot + gamma + 1) % wheel_len].append(winner)
        if record_events:
            events[slot] = 1 if transmitters == 1 else (0 if transmitters == 0 else 2)

    return {
        "success_slots": s_slots[:n_succ].copy(),
        "winners": s_win[:n_succ].copy(),
        "hist_m": hist_m,
        "window_successes": win_succ,
        "window_active": win_act,
        "last_success": np.array(last_success, np.int64),
        "ages": ages,
        "events": events,
    }
