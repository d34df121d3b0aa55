"""Regularised higher-order search for Pareto fronts of smooth multiobjective problems."""

__version__ = "0.1.0"

from .archive import EvaluatedPoint, Front, dominates, hypervolume, hypervolume_mc, nondominated_filter
from .drivers import (
    RunConfig,
    RunTrace,
    bounds_for_trace,
    certify_eps_stationary,
    compute_bounds,
    empirical_counts,
    hop_run,
    lhop_run,
)
from .dualdir import common_descent_direction, stationarity_measure
from .errors import (
    CapabilityError,
    ConfigurationError,
    InputError,
    ParetoHopError,
    SearchError,
    SubproblemError,
)
from .model import model_eval
from .problems import BUILTIN_PROBLEMS, CountingOracle, ObjectiveOracle, ProblemSpec, builtin_problem
from .search import RSParams, margin_candidate_test, regularized_search
from .subsolver import SolverOptions, solve_exact_p1, solve_inexact, verify_certificate

__all__ = [
    "BUILTIN_PROBLEMS", "CapabilityError", "ConfigurationError", "CountingOracle", "EvaluatedPoint",
    "Front", "InputError", "ObjectiveOracle", "ParetoHopError", "ProblemSpec", "RSParams", "RunConfig",
    "RunTrace", "SearchError", "SolverOptions", "SubproblemError", "bounds_for_trace", "builtin_problem",
    "certify_eps_stationary", "common_descent_direction", "compute_bounds", "dominates",
    "empirical_counts", "hop_run", "hypervolume", "hypervolume_mc", "lhop_run", "margin_candidate_test",
    "model_eval", "nondominated_filter", "regularized_search", "solve_exact_p1", "solve_inexact",
    "stationarity_measure", "verify_certificate",
]
