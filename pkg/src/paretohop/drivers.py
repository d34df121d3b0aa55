"""HOP and LHOP outer loops, stationarity certification and complexity bounds.

HOP runs the Regularized Search from every nonstationary archive point per
iteration; LHOP runs it from a single selected point. Both merge the returned
candidates into the archive and keep its nondominated part.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .archive import EvaluatedPoint, Front, dedupe_points, nondominated_filter, reporting_hypervolume
from .dualdir import common_descent_direction
from .errors import ConfigurationError, InputError, SearchError, SubproblemError
from .problems import CountingOracle
from .search import RSParams, regularized_search
from .serialize import fmt_float

__all__ = [
    "RunConfig",
    "UpdateRecord",
    "IterationRecord",
    "RunTrace",
    "BoundReport",
    "StationarityReport",
    "EmpiricalCounts",
    "hop_run",
    "lhop_run",
    "run",
    "certify_eps_stationary",
    "progress_constant",
    "n_f_bound",
    "compute_bounds",
    "bounds_for_trace",
    "empirical_counts",
    "hi_increase_violations",
]

ALGORITHMS = ("hop", "lhop")
SELECTIONS = ("max_stationarity", "round_robin", "random")
TRACE_COLUMNS = (
    "k", "archive_size", "hypervolume", "min_stationarity", "max_stationarity",
    "rs_trials_this_iter", "cum_f_evals", "cum_grad_evals",
)


@dataclass(frozen=True)
class RunConfig:
    """Configuration of one HOP or LHOP run.

    ``alpha`` is the offset of the reference point above the componentwise
    maximum of F over the start points; ``threads`` only affects HOP.
    """

    algorithm: str = "hop"
    eps: float = 1e-3
    rsparams: RSParams = field(default_factory=RSParams)
    lhop_selection: str = "max_stationarity"
    seed: int = 0
    k_max: int = 1000
    alpha: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}", field="algorithm")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ConfigurationError("eps must be positive", field="eps")
        if self.lhop_selection not in SELECTIONS:
            raise ConfigurationError(f"lhop_selection must be one of {SELECTIONS}", field="lhop_selection")
        if self.k_max < 1:
            raise ConfigurationError("k_max must be at least 1", field="k_max")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError("alpha must be positive", field="alpha")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1", field="threads")


@dataclass(frozen=True)
class UpdateRecord:
    """One RS call within an iteration."""

    index: int
    start_stationarity: float
    final_stationarity: float
    f_evals: int
    trials: int
    step_norm: float
    sigma: np.ndarray
    in_box: bool


@dataclass(frozen=True)
class IterationRecord:
    """State of the archive X_k and the RS work done in iteration k."""

    k: int
    archive_size: int
    hypervolume: float
    min_stationarity: float
    max_stationarity: float
    rs_trials: int
    cum_f_evals: int
    cum_grad_evals: int
    cum_tensor_evals: int
    n_outside: int
    n_nonstationary: int
    updates: tuple = ()


@dataclass
class RunTrace:
    """Everything a run produced.

    ``termination`` is ``converged``, ``k_max`` or ``search_error``. The last
    record describes the terminal archive and carries no updates.
    """

    algorithm: str
    eps: float
    records: list
    front: Front
    termination: str
    reference_point: np.ndarray
    initial_hypervolume: float
    initial_f_evals: int
    start_front: Front
    trial_log: list = field(default_factory=list)
    error: str | None = None
    failed_trials: list = field(default_factory=list)
    alpha: float = 1.0

    @property
    def iterations(self):
        return sum(1 for r in self.records if r.updates)

    @property
    def hypervolumes(self):
        return np.array([r.hypervolume for r in self.records])

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.records:
            writer.writerow([
                r.k, r.archive_size, fmt_float(r.hypervolume), fmt_float(r.min_stationarity),
                fmt_float(r.max_stationarity), r.rs_trials, r.cum_f_evals, r.cum_grad_evals,
            ])
        return buf.getvalue()


class _Stationarity:
    """Cache of gradients and ||v|| keyed by the exact bits of x."""

    def __init__(self, oracle):
        self.oracle = oracle
        self._cache = {}

    def get(self, point):
        key = point.key
        if key not in self._cache:
            G = self.oracle.gradients(point.x)
            self._cache[key] = (G, common_descent_direction(G).norm)
        return self._cache[key]

    def norm(self, point):
        return self.get(point)[1]


def _evaluate_start(oracle, X0):
    pts = []
    for x in X0:
        if isinstance(x, EvaluatedPoint):
            pts.append(x)
        else:
            x = np.asarray(x, dtype=float)
            pts.append(EvaluatedPoint(x, oracle.eval(x), "initial"))
    if not pts:
        raise InputError("X0 must contain at least one point")
    return pts


def _record(k, front, rho, stat, counter, nonstat, updates=(), rs_trials=0):
    hv, outside = reporting_hypervolume(front, rho)
    norms = [stat.norm(p) for p in front] + [u.final_stationarity for u in updates]
    return IterationRecord(
        k=k, archive_size=len(front), hypervolume=hv,
        min_stationarity=float(min(norms)), max_stationarity=float(max(norms)),
        rs_trials=rs_trials, cum_f_evals=counter.f_evals, cum_grad_evals=counter.grad_evals,
        cum_tensor_evals=counter.tensor_evals, n_outside=outside,
        n_nonstationary=nonstat, updates=tuple(updates),
    )


def _drive(oracle, X0, config, select):
    counter = oracle if isinstance(oracle, CountingOracle) else CountingOracle(oracle)
    params = config.rsparams
    start = _evaluate_start(counter, X0)
    initial_f_evals = counter.f_evals
    rho = np.max([p.fx for p in start], axis=0) + config.alpha
    front = nondominated_filter(dedupe_points(start))
    start_front = front
    stat = _Stationarity(counter)
    warm = {}
    records, trial_log = [], []
    hv0 = reporting_hypervolume(front, rho)[0]
    k = 0
    while True:
        norms = [stat.norm(p) for p in front]
        nonstat = [i for i, v in enumerate(norms) if v > config.eps]
        if not nonstat or k >= config.k_max:
            records.append(_record(k, front, rho, stat, counter, len(nonstat)))
            termination = "converged" if not nonstat else "k_max"
            break
        chosen = select(front, norms, nonstat, k)
        snapshot = front

        def search(i):
            pt = snapshot[i]
            return regularized_search(
                counter, pt, snapshot, params, k=k,
                sigma0=warm.get(pt.key), gradients=stat.get(pt)[0],
            )

        try:
            if config.threads > 1 and len(chosen) > 1:
                with ThreadPoolExecutor(max_workers=config.threads) as pool:
                    outcomes = list(pool.map(search, chosen))
            else:
                outcomes = [search(i) for i in chosen]
        except (SearchError, SubproblemError) as exc:
            records.append(_record(k, front, rho, stat, counter, len(nonstat)))
            return RunTrace(
                config.algorithm, config.eps, records, front, "search_error", rho, hv0,
                initial_f_evals, start_front, trial_log, error=str(exc),
                failed_trials=[(k, t) for t in getattr(exc, "trials", [])], alpha=config.alpha,
            )

        updates, pool_points = [], list(snapshot)
        for i, out in zip(chosen, outcomes):
            for y in out.Y:
                warm[y.key] = out.sigma
            pool_points.extend(out.Y)
            trial_log.extend((k, t) for t in out.trials)
            updates.append(UpdateRecord(
                index=i, start_stationarity=norms[i],
                final_stationarity=stat.norm(out.final), f_evals=out.f_evals,
                trials=len(out.trials), step_norm=float(np.linalg.norm(out.s)),
                sigma=out.sigma, in_box=bool(np.all(snapshot[i].fx <= rho)),
            ))
        rs_trials = sum(u.trials for u in updates)
        records.append(_record(k, front, rho, stat, counter, len(nonstat), updates, rs_trials))
        front = nondominated_filter(dedupe_points(pool_points))
        k += 1
    return RunTrace(
        config.algorithm, config.eps, records, front, termination, rho, hv0,
        initial_f_evals, start_front, trial_log, alpha=config.alpha,
    )


def hop_run(oracle, X0, config):
    """Run HOP: every point with ``||v|| > eps`` is searched each iteration.

    All searches of one iteration see the same archive snapshot and their
    results are merged in archive order, so the outcome does not depend on
    ``config.threads``.

    Parameters
    ----------
    oracle : ObjectiveOracle
        Wrapped in a :class:`CountingOracle` unless it already is one.
    X0 : sequence of array_like or EvaluatedPoint
    config : RunConfig

    Returns
    -------
    RunTrace
    """
    if config.algorithm != "hop":
        raise ConfigurationError("hop_run requires algorithm='hop'", field="algorithm")
    return _drive(oracle, X0, config, lambda front, norms, nonstat, k: nonstat)


def lhop_run(oracle, X0, config):
    """Run LHOP: a single nonstationary point is searched per iteration.

    Selection follows ``config.lhop_selection``: ``max_stationarity`` takes
    the largest ``||v||`` (earliest on ties), ``round_robin`` cycles through
    the nonstationary points, ``random`` draws with ``config.seed``.
    """
    if config.algorithm != "lhop":
        raise ConfigurationError("lhop_run requires algorithm='lhop'", field="algorithm")
    rng = np.random.default_rng(config.seed)

    def select(front, norms, nonstat, k):
        if config.lhop_selection == "max_stationarity":
            return [nonstat[int(np.argmax([norms[i] for i in nonstat]))]]
        if config.lhop_selection == "round_robin":
            return [nonstat[k % len(nonstat)]]
        return [nonstat[int(rng.integers(len(nonstat)))]]

    return _drive(oracle, X0, config, select)


def run(oracle, X0, config):
    """Dispatch to :func:`hop_run` or :func:`lhop_run`."""
    return (hop_run if config.algorithm == "hop" else lhop_run)(oracle, X0, config)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationarityReport:
    measures: np.ndarray
    eps: float

    @property
    def max(self):
        return float(self.measures.max()) if self.measures.size else 0.0

    @property
    def failing(self):
        return [int(i) for i in np.nonzero(self.measures > self.eps)[0]]

    @property
    def passed(self):
        return not self.failing


def certify_eps_stationary(oracle, front, eps):
    """Per-point ``||v(x)||`` and whether all are at most ``eps``."""
    measures = np.array([common_descent_direction(oracle.gradients(p.x)).norm for p in front])
    return StationarityReport(measures, float(eps))


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Closed-form complexity constants and bounds; None where unavailable."""

    available: bool
    p: int
    m: int
    eps: float
    c: float | None = None
    c_tilde: float | None = None
    c_hat: float | None = None
    sigma_max: float | None = None
    n_F: int | None = None
    HI_bar: float | None = None
    HI_0: float | None = None
    f0_gap: float | None = None
    X_eps_size: int | None = None
    bound_Keps1: float | None = None
    bound_NF1: float | None = None
    bound_Keps2: float | None = None
    bound_NF2: float | None = None
    bound_lhop: float | None = None
    bound_lhop_NF: float | None = None
    reason: str = ""

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def progress_constant(eta, sigma_l_min, sigma_max, L_max, p, tau=0.0, delta_bar=1.0, exact=True):
    """Progress constant ``c`` (exact) or ``c~`` (inexact).

    ``c = eta sigma_l_min / p! * ((p+1) sigma_max / p! + L_max / (p-1)!)^(-(p+1)/p)``;
    the inexact form replaces the bracket by ``tau + delta_bar * (...)``.
    """
    fp = math.factorial(p)
    bracket = (p + 1) * sigma_max / fp + L_max / math.factorial(p - 1)
    if not exact:
        bracket = tau + delta_bar * bracket
    return eta * sigma_l_min / fp * bracket ** (-(p + 1) / p)


def n_f_bound(eta, gamma, sigma_l, sigma_u, L):
    """Worst-case F-evaluations per search:
    ``max_i ceil(log(sigma_l_i / max(L_i/(gamma(1-eta)), sigma_u_i)) / log gamma) + 1``.
    """
    sigma_l, sigma_u, L = np.broadcast_arrays(
        np.asarray(sigma_l, float), np.asarray(sigma_u, float), np.asarray(L, float))
    top = np.maximum(L / (gamma * (1.0 - eta)), sigma_u)
    counts = np.ceil(np.log(sigma_l / top) / math.log(gamma) - 1e-12) + 1
    return int(np.max(counts))


def _floor(v):
    return math.floor(v) if math.isfinite(v) else math.inf


def compute_bounds(params, L, eps, HI_bar=None, HI_0=None, f0_gap=None, X_eps_size=1, m=None, exact=None):
    """Evaluate every bound constant for the given run quantities.

    Parameters
    ----------
    params : RSParams
    L : array_like or None
        Lipschitz constants of the order-p derivatives; None gives a report
        with ``available=False``.
    eps : float
    HI_bar, HI_0 : float, optional
        Hypervolume upper bound and initial hypervolume.
    f0_gap : float, optional
        ``min_i (f_i(x0) - f_i_min)``; needed for the all-points bound.
    X_eps_size : int
        Largest archive size up to the stopping iteration.
    m : int, optional
        Number of objectives (defaults to ``len(L)``).
    exact : bool, optional
        Whether steps are exact; defaults to ``params.uses_exact``. Inexact
        runs use ``c~`` in every bound.
    """
    p = params.p
    if eps <= 0:
        raise ConfigurationError("eps must be positive", field="eps")
    if L is None:
        return BoundReport(False, p, m or 0, eps, reason="Lipschitz constants unknown")
    L = np.atleast_1d(np.asarray(L, dtype=float))
    m = m or L.size
    L = np.broadcast_to(L, (m,))
    if not np.all(np.isfinite(L)) or np.any(L < 0):
        return BoundReport(False, p, m, eps, reason="Lipschitz constants must be finite and nonnegative")
    exact = params.uses_exact if exact is None else exact
    lo, hi = params.bounds(m)
    L_max = float(L.max())
    sigma_max = max(L_max / (params.gamma * (1.0 - params.eta)), float(hi.max()))
    c = progress_constant(params.eta, float(lo.min()), sigma_max, L_max, p)
    c_tilde = progress_constant(params.eta, float(lo.min()), sigma_max, L_max, p,
                                params.tau, params.delta_bar, exact=False)
    c_hat = c if exact else c_tilde
    nF = n_f_bound(params.eta, params.gamma, lo, hi, L)
    rate_m = eps ** (-m * (p + 1) / p)
    rate_1 = eps ** (-(p + 1) / p)
    K1 = K2 = NF1 = NF2 = KL = NFL = None
    if HI_bar is not None and HI_0 is not None:
        K1 = _floor((HI_bar - HI_0) / c_hat ** m * rate_m)
        NF1 = nF * X_eps_size * K1
        KL = K1
        NFL = nF * KL
    if f0_gap is not None:
        K2 = _floor(f0_gap / c_hat * rate_1)
        NF2 = nF * X_eps_size * K2
    return BoundReport(
        True, p, m, float(eps), c=c, c_tilde=c_tilde, c_hat=c_hat, sigma_max=sigma_max, n_F=nF,
        HI_bar=HI_bar, HI_0=HI_0, f0_gap=f0_gap, X_eps_size=X_eps_size,
        bound_Keps1=K1, bound_NF1=NF1, bound_Keps2=K2, bound_NF2=NF2,
        bound_lhop=KL, bound_lhop_NF=NFL,
    )


@dataclass(frozen=True)
class EmpiricalCounts:
    """Observed counterparts of the bounded quantities.

    ``K1`` counts iterations where some searched point ends with
    ``||v(x+s)|| >= eps``; ``K2`` those where every archive point (HOP) or
    the selected point (LHOP) does. ``NF1``/``NF2`` are the F-evaluations of
    the searches before the first iteration outside the respective set, and
    ``X_eps1``/``X_eps2`` the largest archive size up to that iteration.
    """

    K1: int
    K2: int
    NF1: int
    NF2: int
    X_eps1: int
    X_eps2: int


def _prefix(records, member):
    nf, size = 0, 0
    for r in records:
        size = max(size, r.archive_size)
        if not r.updates or not member(r):
            break
        nf += sum(u.f_evals for u in r.updates)
    return nf, size


def empirical_counts(trace):
    eps = trace.eps
    hop = trace.algorithm == "hop"

    def in_k1(r):
        return bool(r.updates) and any(u.final_stationarity >= eps for u in r.updates)

    def in_k2(r):
        if not r.updates or not all(u.final_stationarity >= eps for u in r.updates):
            return False
        return len(r.updates) == r.archive_size if hop else True

    nf1, x1 = _prefix(trace.records, in_k1)
    nf2, x2 = _prefix(trace.records, in_k2)
    return EmpiricalCounts(
        K1=sum(in_k1(r) for r in trace.records), K2=sum(in_k2(r) for r in trace.records),
        NF1=nf1, NF2=nf2, X_eps1=x1, X_eps2=x2,
    )


def bounds_for_trace(oracle, trace, params):
    """Bounds instantiated with the run's own quantities.

    ``HI_bar`` is the final hypervolume plus the slack ``alpha^m``;
    ``f0_gap`` takes the largest ``min_i (f_i(x0) - f_i_min)`` over start points.
    """
    m = oracle.m
    L = oracle.lipschitz_constants(params.p)
    counts = empirical_counts(trace)
    HI_bar = float(trace.records[-1].hypervolume) + trace.alpha ** m
    f0_gap = None
    if oracle.f_min is not None:
        f0_gap = max(float(np.min(p.fx - oracle.f_min)) for p in trace.start_front)
    return compute_bounds(
        params, L, trace.eps, HI_bar=HI_bar, HI_0=trace.initial_hypervolume, f0_gap=f0_gap,
        X_eps_size=max(counts.X_eps1, counts.X_eps2, 1), m=m,
    )


def hi_increase_violations(trace, c, m, p, atol=1e-9):
    """Iterations whose HI increase falls below ``c^m (min ||v(x+s)||)^(m(p+1)/p)``.

    Only iterations whose searched points all lie inside the reference box
    are checked. Returns a list of ``(k, increase, required)``.
    """
    out = []
    recs = trace.records
    for r, nxt in zip(recs, recs[1:]):
        if not r.updates or not all(u.in_box for u in r.updates):
            continue
        vmin = min(u.final_stationarity for u in r.updates)
        required = c ** m * vmin ** (m * (p + 1) / p)
        increase = nxt.hypervolume - r.hypervolume
        if increase < required - atol:
            out.append((r.k, increase, required))
    return out
