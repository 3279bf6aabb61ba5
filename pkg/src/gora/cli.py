"""Command line: optimize, simulate, sweep and validate.

Emits the CSV files the plotting layer consumes. Floating-point cells use
17 significant digits, so parsing a file back reproduces the in-memory
floats bit for bit; rerunning with the manifest's scenario and seeds
reproduces the files byte for byte.
"""

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .optimizer import POLICIES, SolverError, optimize
from .renewal import ConvergenceError, PolicyParams, PrecisionError
from .scenario import Scenario, ScenarioError, load_scenario
from .simulator import SimConfig, assumption1_report, run

log = logging.getLogger("gora.cli")

OPTIMIZE_SCHEMA = "gora.optimize/1"
SIMULATE_SCHEMA = "gora.simulate/1"

OPTIMIZE_COLUMNS = (
    "n", "policy", "status", "b_star", "gamma_star", "tau_star", "p_s",
    "L_star", "f1", "f2", "end_of_cycle_penalty", "convexity", "corollary2",
    "continuous_b", "continuous_gamma", "boundary", "d", "message",
)
SIMULATE_COLUMNS = (
    "n", "policy", "seed", "status", "b", "gamma", "tau",
    "time_avg_penalty", "empirical_ps", "stderr", "renewals", "stationary",
    "d", "message",
)

_POLICY_RANK = {p: i for i, p in enumerate(POLICIES)}
_ROW_ERRORS = (SolverError, ConvergenceError, PrecisionError, ValueError)


def format_float(x):
    """17 significant digits: enough for exact float round-trips."""
    return format(float(x), ".17g")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path, columns, rows):
    """Write dict rows under a fixed header; cells beyond the schema are
    a programming error, missing ones write as empty."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise ValueError(f"row has cells outside the schema: {sorted(extra)}")
            w.writerow([_cell(row.get(c)) for c in columns])


def read_csv(path):
    """Rows as dicts of strings, validating the header is intact."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        if reader.fieldnames is None:
            raise ValueError(f"{path} is empty")
        return tuple(reader.fieldnames), rows


def _optimize_task(args):
    scenario, n, policy = args
    try:
        res = optimize(scenario.goal, n, scenario.d, scenario.optimizer, policy)
    except _ROW_ERRORS as exc:
        log.warning("optimize n=%d policy=%s failed: %s", n, policy, exc)
        return {
            "n": n, "policy": policy, "d": scenario.d,
            "status": type(exc).__name__, "message": str(exc),
        }
    return {
        "n": n,
        "policy": policy,
        "status": res.status,
        "b_star": res.b_star,
        "gamma_star": res.gamma_star,
        "tau_star": res.tau_star,
        "p_s": res.ps_star,
        "L_star": res.L_star,
        "f1": res.f1,
        "f2": res.f2,
        "end_of_cycle_penalty": res.end_of_cycle_penalty,
        "convexity": res.convexity,
        "corollary2": res.corollary2,
        "continuous_b": res.continuous_b,
        "continuous_gamma": res.continuous_gamma,
        "boundary": res.boundary,
        "d": res.d,
        "message": "",
    }


def _simulate_task(args):
    scenario, n, policy, seed, params = args
    base = {"n": n, "policy": policy, "seed": seed, "d": scenario.d}
    if params is None:
        return dict(base, status="skipped", message="no optimizer parameters")
    b, gamma, tau = params
    config = SimConfig(
        n=n,
        policy=PolicyParams(b=b, tau=tau, gamma=gamma, d=scenario.d),
        horizon=scenario.sim.horizon,
        warmup=scenario.sim.warmup,
        seed=seed,
    )
    try:
        stats = run(config, scenario.goal)
    except (ValueError, RuntimeError) as exc:
        log.warning("simulate n=%d policy=%s seed=%d failed: %s", n, policy, seed, exc)
        return dict(base, status=type(exc).__name__, message=str(exc))
    report = assumption1_report(stats, config)
    stationary = "unknown" if report.insufficient else _cell(not report.drifting)
    return dict(
        base,
        status="ok",
        b=b,
        gamma=gamma,
        tau=tau,
        time_avg_penalty=stats.time_avg_penalty,
        empirical_ps=stats.empirical_ps,
        stderr=stats.stderr,
        renewals=stats.renewals,
        stationary=stationary,
        message="",
    )


def _run_tasks(task_fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task_fn, tasks))
    return [task_fn(t) for t in tasks]


def _sort_rows(rows):
    return sorted(
        rows, key=lambda r: (r["n"], _POLICY_RANK[r["policy"]], r.get("seed", 0))
    )


def cmd_optimize(scenario: Scenario, workers=1):
    """One solved row per (n, policy); failures become status rows."""
    tasks = [(scenario, n, p) for n in scenario.n_list for p in scenario.policies]
    return _sort_rows(_run_tasks(_optimize_task, tasks, workers))


def params_from_rows(rows):
    """(n, policy) -> (b, gamma, tau) for rows the optimizer solved."""
    params = {}
    for row in rows:
        if row["status"] == "ok":
            params[(row["n"], row["policy"])] = (
                row["b_star"], row["gamma_star"], row["tau_star"],
            )
    return params


def cmd_simulate(scenario: Scenario, params, workers=1, seed_override=None):
    """One simulated row per (n, policy, seed) at the supplied operating
    points; missing points become skipped rows."""
    if scenario.sim is None:
        raise ScenarioError(f"scenario {scenario.name!r} has no sim block")
    seeds = (seed_override,) if seed_override is not None else scenario.sim.seeds
    tasks = [
        (scenario, n, p, seed, params.get((n, p)))
        for n in scenario.n_list
        for p in scenario.policies
        for seed in seeds
    ]
    return _sort_rows(_run_tasks(_simulate_task, tasks, workers))


def sweep_manifest(scenario: Scenario, seeds, seed_override=None):
    return {
        "tool": "gora",
        "version": __version__,
        "schemas": {
            "optimize.csv": OPTIMIZE_SCHEMA,
            "simulate.csv": SIMULATE_SCHEMA,
        },
        "scenario": scenario.source,
        "effective_seeds": list(seeds),
        "seed_override": seed_override,
    }


def cmd_sweep(scenario: Scenario, out_dir, workers=1, seed_override=None):
    """optimize.csv + simulate.csv + manifest.json into out_dir.

    Returns the number of rows whose status is not ok."""
    if scenario.sim is None:
        raise ScenarioError(f"scenario {scenario.name!r} has no sim block")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    opt_rows = cmd_optimize(scenario, workers)
    sim_rows = cmd_simulate(
        scenario, params_from_rows(opt_rows), workers, seed_override
    )
    write_csv(out / "optimize.csv", OPTIMIZE_COLUMNS, opt_rows)
    write_csv(out / "simulate.csv", SIMULATE_COLUMNS, sim_rows)
    seeds = (seed_override,) if seed_override is not None else scenario.sim.seeds
    manifest = sweep_manifest(scenario, seeds, seed_override)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    bad = [r for r in opt_rows + sim_rows if r["status"] != "ok"]
    for row in bad:
        log.warning("row not ok: %s", row)
    return len(bad)


def _setup_logging():
    level = os.environ.get("GORA_LOG", "").strip().upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load(parser, path):
    if not Path(path).is_file():
        parser.error(f"scenario file not found: {path}")
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        parser.error(str(exc))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gora",
        description="Goal-oriented random access: optimize and simulate "
        "(b, tau, Gamma) policies over a slotted collision channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def io_flags(p, seeds=False):
        p.add_argument("--scenario", required=True, help="scenario YAML path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        if seeds:
            p.add_argument(
                "--seed-override", type=int, default=None,
                help="replace the scenario seed list with this one seed",
            )

    io_flags(sub.add_parser("optimize", help="solve each (n, policy)"))
    io_flags(sub.add_parser("simulate", help="simulate at the solved points"),
             seeds=True)
    io_flags(sub.add_parser("sweep", help="optimize + simulate + manifest"),
             seeds=True)
    val = sub.add_parser("validate", help="run the acceptance suite")
    val.add_argument("--mutate-hessian", action="store_true",
                     help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "validate":
        from .validate import main as validate_main

        return validate_main(mutate_hessian=args.mutate_hessian)

    scenario = _load(parser, args.scenario)
    if args.workers < 1:
        parser.error(f"--workers must be >= 1, got {args.workers}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "optimize":
            rows = cmd_optimize(scenario, args.workers)
            write_csv(out / "optimize.csv", OPTIMIZE_COLUMNS, rows)
            bad = sum(r["status"] != "ok" for r in rows)
        elif args.command == "simulate":
            opt_rows = cmd_optimize(scenario, args.workers)
            rows = cmd_simulate(
                scenario, params_from_rows(opt_rows), args.workers,
                args.seed_override,
            )
            write_csv(out / "simulate.csv", SIMULATE_COLUMNS, rows)
            bad = sum(r["status"] != "ok" for r in opt_rows + rows)
        else:
            bad = cmd_sweep(scenario, out, args.workers, args.seed_override)
    except ScenarioError as exc:
        print(f"gora: {exc}", file=sys.stderr)
        return 2
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
