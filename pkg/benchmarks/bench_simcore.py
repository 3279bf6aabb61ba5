"""Benchmark the compiled slot kernel against the pure-Python fallback.

Both kernels must produce identical success-event digests on every
configuration; the table reports slots per second and the speedup.

Usage: python3 benchmarks/bench_simcore.py [--horizon N] [--repeat K]
"""

import argparse
import time

from gora import make_goal
from gora.renewal import PolicyParams
from gora.simulator import SimConfig, available_kernels, run

QUAD = make_goal([0.0], [[25.0, -10.0, 1.0]])

CASES = (
    ("small dense", dict(n=5, b=0, gamma=2, tau=0.3)),
    ("staggered", dict(n=50, b=10, gamma=120, tau=0.08)),
    ("large sparse", dict(n=200, b=100, gamma=800, tau=0.02)),
)


def config(params, horizon, seed=2026):
    return SimConfig(
        n=params["n"],
        policy=PolicyParams(
            b=float(params["b"]), tau=params["tau"],
            gamma=float(params["gamma"]), d=1.0,
        ),
        horizon=horizon, warmup=horizon // 10, seed=seed,
    )


def best_rate(cfg, kernel, repeat):
    stats, elapsed = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        stats = run(cfg, QUAD, kernel=kernel)
        elapsed = min(elapsed, time.perf_counter() - t0)
    return stats, cfg.horizon / elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=200_000,
                    help="slots per run (default 200000)")
    ap.add_argument("--repeat", type=int, default=3,
                    help="timed repetitions, best-of (default 3)")
    args = ap.parse_args()

    kernels = available_kernels()
    if "compiled" not in kernels:
        print("compiled kernel is not built; showing the fallback alone")

    header = f"{'case':<14} " + " ".join(f"{k + ' slots/s':>18}" for k in kernels)
    print(header + ("   speedup" if len(kernels) == 2 else ""))
    for label, params in CASES:
        rates, digests = {}, {}
        for kernel in kernels:
            stats, rate = best_rate(config(params, args.horizon), kernel,
                                    args.repeat)
            rates[kernel] = rate
            digests[kernel] = stats.success_event_digest
        if len(set(digests.values())) != 1:
            raise SystemExit(f"digest mismatch on {label!r}: {digests}")
        row = f"{label:<14} " + " ".join(f"{rates[k]:>18,.0f}" for k in kernels)
        if len(kernels) == 2:
            row += f"   {rates['compiled'] / rates['python']:>6.1f}x"
        print(row)
    print("success-event digests identical across kernels")


if __name__ == "__main__":
    main()
