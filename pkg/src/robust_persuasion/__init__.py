"""Robust Bayesian persuasion against delta-best-responding receivers.

Exact LP solver, small-state enumeration solver, grid-based approximation
scheme, instance generators and independent oracles.
"""

from .errors import (
    BadSubsetSumInput,
    DeltaOutOfRange,
    DimensionMismatch,
    InvalidInstance,
    InvalidScheme,
    MissingResponse,
    NoWitness,
    PersuasionError,
    SeedInfeasible,
    SizeGuard,
    SolverFailure,
)
from .exact import SignalSpace, SolverResult, build_robust_lp, enumerate_signal_space, live_signal_space, solve_exact
from .instances import (
    SubsetSumInput,
    apples_instance,
    direct_revelation_example,
    find_witness,
    random_instance,
    subset_sum_instance,
    yes_certificate_scheme,
)
from .lp import LinearProgram, LpBuilder, LpSolution, Status, check_feasible, solve, to_lp_format
from .model import (
    PersuasionInstance,
    Posterior,
    ReceiverStrategy,
    SignalingScheme,
    SubsetActionTuple,
    best_response,
    br_delta_set,
    evaluate_signals,
    expected_utility,
    posterior,
    robust_utility,
    strategy_utility,
    validate_instance,
    validate_scheme,
)
from .oracle import best_k_signal_search, brute_force_feasible_tuples, canonicalize_scheme, grid_search_optimum
from .qptas import KUniformGrid, QptasSignal, build_qptas_lp, epsilon_for_grid, k_uniform_grid, solve_qptas
from .smallstate import (
    ExplorationReport,
    FeasibilityVerdict,
    explore,
    feasibility_margin,
    neighbors,
    solve_small_states,
)

__version__ = "0.1.0"
