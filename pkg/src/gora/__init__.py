"""Goal-oriented random access: analytical optimizer and slot-level simulator.

n sensing nodes share a slotted collision channel. After a success a node
stays silent for Gamma slots, then contends with probability tau per slot
until it succeeds again; every transmission carries the buffered packet
whose age is exactly b slots. The package computes the stationary
time-average goal penalty of that policy, optimizes (b, Gamma, tau) per
node count, and cross-checks the analysis with a Monte Carlo simulator.
"""

from .goal import (
    ArgminResult,
    GoalDomainError,
    GoalFunction,
    GoalFunctionError,
    from_records,
    make_goal,
)
from .optimizer import (
    POLICIES,
    BruteForceRanges,
    OptimizationResult,
    OptimizerOptions,
    SolverError,
    brute_force_reference,
    corollary2_diagnostic,
    optimize,
    round_to_integers,
    solve_fixed_tau,
)
from .renewal import (
    ChannelModel,
    ConvergenceError,
    CycleStats,
    NonSmoothError,
    PolicyParams,
    PrecisionError,
    SeriesControl,
    cycle_stats,
    expected_penalty,
    external_ps,
    hessian,
    residual_b,
    residual_gamma,
    steady_state_ps,
)
from .scenario import Scenario, ScenarioError, load_scenario, scenario_from_dict
from .simulator import (
    SimConfig,
    SimStats,
    assumption1_report,
    available_kernels,
    run,
    shift_equivalence_check,
)

__all__ = [
    "ArgminResult",
    "BruteForceRanges",
    "ChannelModel",
    "ConvergenceError",
    "CycleStats",
    "GoalDomainError",
    "GoalFunction",
    "GoalFunctionError",
    "NonSmoothError",
    "OptimizationResult",
    "OptimizerOptions",
    "POLICIES",
    "PolicyParams",
    "PrecisionError",
    "Scenario",
    "ScenarioError",
    "SeriesControl",
    "SimConfig",
    "SimStats",
    "SolverError",
    "assumption1_report",
    "available_kernels",
    "brute_force_reference",
    "corollary2_diagnostic",
    "cycle_stats",
    "expected_penalty",
    "external_ps",
    "from_records",
    "hessian",
    "load_scenario",
    "make_goal",
    "optimize",
    "residual_b",
    "residual_gamma",
    "round_to_integers",
    "run",
    "scenario_from_dict",
    "shift_equivalence_check",
    "solve_fixed_tau",
    "steady_state_ps",
]

__version__ = "0.1.0"
