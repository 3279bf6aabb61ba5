"""Scenario files: the experiment descriptions the command line runs.

A scenario is a YAML mapping with explicit keys. Unknown keys are errors
at every nesting level, so a typo cannot silently change an experiment.
"""

import dataclasses
import re
from dataclasses import dataclass

import yaml

from .goal import GoalFunction, GoalFunctionError, from_records
from .optimizer import POLICIES, OptimizerOptions
from .renewal import SeriesControl


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario content."""


_RANGE = re.compile(r"^(\d+)\s*\.\.\s*(\d+)(?:\s+step\s+(\d+))?$")

_TOP_KEYS = {"name", "goal", "d", "n_list", "policies", "sim", "optimizer"}
_SIM_KEYS = {"horizon", "warmup", "seeds"}
_OPT_KEYS = {f.name for f in dataclasses.fields(OptimizerOptions)}
_SERIES_KEYS = {f.name for f in dataclasses.fields(SeriesControl)}


@dataclass(frozen=True)
class SimBlock:
    """Simulation budget and seed list for one scenario."""

    horizon: int
    warmup: int
    seeds: tuple

    def __post_init__(self):
        if self.horizon < 1:
            raise ScenarioError(f"sim.horizon must be >= 1, got {self.horizon}")
        if not 0 <= self.warmup < self.horizon:
            raise ScenarioError(
                f"sim.warmup must lie in [0, horizon), got {self.warmup}"
            )
        if not self.seeds:
            raise ScenarioError("sim.seeds must be a non-empty list")
        for s in self.seeds:
            if not isinstance(s, int) or s < 0:
                raise ScenarioError(f"sim.seeds entries must be ints >= 0, got {s!r}")


@dataclass(frozen=True)
class Scenario:
    """One experiment: a goal, the node counts to sweep and the policies to
    compare, plus optional simulation and solver settings.

    `source` echoes the parsed file so output manifests can reproduce the
    run without re-reading the original path.
    """

    name: str
    goal: GoalFunction
    d: float
    n_list: tuple
    policies: tuple
    sim: SimBlock | None
    optimizer: OptimizerOptions
    source: dict


def parse_n_list(value):
    """Node counts from an int, a list of ints, or a range string
    like "500..2500 step 500" (inclusive endpoints, default step 1)."""
    if isinstance(value, bool):
        raise ScenarioError(f"n_list must hold integers, got {value!r}")
    if isinstance(value, int):
        value = [value]
    elif isinstance(value, str):
        m = _RANGE.match(value.strip())
        if not m:
            raise ScenarioError(
                f"n_list range must look like 'a..b step c', got {value!r}"
            )
        lo, hi, step = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
        if step < 1:
            raise ScenarioError(f"n_list step must be >= 1, got {step}")
        if hi < lo:
            raise ScenarioError(f"n_list range is empty: {value!r}")
        value = list(range(lo, hi + 1, step))
    elif not isinstance(value, (list, tuple)):
        raise ScenarioError(f"n_list must be an int, list or range string, got {value!r}")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ScenarioError(f"n_list entries must be ints >= 1, got {v!r}")
        out.append(v)
    if not out:
        raise ScenarioError("n_list is empty")
    return tuple(out)


def _reject_unknown(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{where} must be a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ScenarioError(
            f"unknown {where} keys {unknown}; allowed: {sorted(allowed)}"
        )


def _optimizer_options(data):
    if data is None:
        return OptimizerOptions()
    _reject_unknown(data, _OPT_KEYS, "optimizer")
    kwargs = dict(data)
    series = kwargs.pop("series", None)
    if series is not None:
        _reject_unknown(series, _SERIES_KEYS, "optimizer.series")
        kwargs["series"] = SeriesControl(**series)
    for key in ("tau_bracket", "tau_grid", "gamma_seeds"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(kwargs[key])
    try:
        return OptimizerOptions(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad optimizer options: {exc}") from exc


def _policies(value):
    if value is None:
        return POLICIES
    if not isinstance(value, (list, tuple)) or not value:
        raise ScenarioError(f"policies must be a non-empty list, got {value!r}")
    bad = sorted(set(value) - set(POLICIES))
    if bad:
        raise ScenarioError(f"unknown policies {bad}; allowed: {list(POLICIES)}")
    # canonical order keeps output row order independent of file order
    return tuple(p for p in POLICIES if p in value)


def scenario_from_dict(data, origin="<memory>") -> Scenario:
    """Validate a parsed scenario mapping; `origin` labels error messages."""
    _reject_unknown(data, _TOP_KEYS, f"scenario ({origin})")
    missing = sorted({"name", "goal", "n_list"} - set(data))
    if missing:
        raise ScenarioError(f"scenario ({origin}) is missing keys {missing}")
    name = data["name"]
    if not isinstance(name, str) or not name.strip():
        raise ScenarioError(f"scenario name must be a non-empty string, got {name!r}")
    try:
        goal = from_records(data["goal"])
    except (GoalFunctionError, ValueError, TypeError) as exc:
        raise ScenarioError(f"bad goal declaration: {exc}") from exc
    d = float(data.get("d", 1.0))
    if not d > 0.0:
        raise ScenarioError(f"slot duration d must be > 0, got {d}")
    sim = None
    if data.get("sim") is not None:
        _reject_unknown(data["sim"], _SIM_KEYS, "sim")
        blk = data["sim"]
        if "horizon" not in blk or "seeds" not in blk:
            raise ScenarioError("sim block needs horizon and seeds")
        seeds = blk["seeds"]
        if isinstance(seeds, int) and not isinstance(seeds, bool):
            seeds = [seeds]
        if not isinstance(seeds, (list, tuple)):
            raise ScenarioError(f"sim.seeds must be a list, got {seeds!r}")
        sim = SimBlock(
            horizon=int(blk["horizon"]),
            warmup=int(blk.get("warmup", 0)),
            seeds=tuple(seeds),
        )
    return Scenario(
        name=name.strip(),
        goal=goal,
        d=d,
        n_list=parse_n_list(data["n_list"]),
        policies=_policies(data.get("policies")),
        sim=sim,
        optimizer=_optimizer_options(data.get("optimizer")),
        source=data,
    )


def load_scenario(path) -> Scenario:
    """Parse and validate one scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path} must contain a mapping at top level")
    return scenario_from_dict(data, origin=str(path))
