"""Regularized Search: adaptive per-objective regularisation around one point.

At trial ``j`` a step ``s^j`` is computed for the current regularisation
vector ``sigma^j`` and the trial point ``x + s^j`` is evaluated. With margin

    nu^j = eta * ||s^j||^(p+1) / p! * sigma^j

the search stops once ``F(x + s^j) <= F(x) - nu^j`` holds componentwise.
Otherwise the failing components of sigma are divided by ``gamma`` and the
trial point is kept as a candidate if it is margin-nondominated by every
point collected so far.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .archive import EvaluatedPoint, Front
from .errors import ConfigurationError, SearchError
from .serialize import fmt_float
from .subsolver import SolverOptions, solve_exact_p1, solve_inexact

__all__ = [
    "RSParams",
    "TrialRecord",
    "RSOutcome",
    "margin_candidate_test",
    "sufficient_decrease_margin",
    "regularized_search",
    "trials_to_csv",
]

SIGMA_INIT_RULES = ("lower", "midpoint", "warm")
SUBSOLVER_MODES = ("auto", "exact", "inexact")


@dataclass(frozen=True)
class RSParams:
    """Parameters of the Regularized Search.

    Attributes
    ----------
    eta : float
        Sufficient-decrease fraction in (0, 1).
    gamma : float
        Divisor in (0, 1) applied to failing regularisation components.
    sigma_l, sigma_u : float or array_like
        Bounds on the initial regularisation, ``0 < sigma_l <= sigma_u``.
    p : int
        Model order.
    sigma_init : {"lower", "midpoint", "warm"}
        Initial regularisation rule. ``warm`` reuses the final sigma of the
        search that produced the point, clipped to the bounds.
    tau, delta_bar : float
        Tolerances of the inexact subsolver.
    j_max : int
        Safety cap on the number of trials.
    subsolver : {"auto", "exact", "inexact"}
        ``auto`` uses the exact dual solver for p = 1 and the inexact solver
        otherwise.
    """

    eta: float = 0.5
    gamma: float = 0.5
    sigma_l: object = 1.0
    sigma_u: object = 4.0
    p: int = 1
    sigma_init: str = "lower"
    tau: float = 1e-2
    delta_bar: float = 2.0
    j_max: int = 200
    subsolver: str = "auto"
    solver_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ConfigurationError("eta must lie in (0,1)", field="eta")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in (0,1)", field="gamma")
        if not isinstance(self.p, (int, np.integer)) or self.p < 1:
            raise ConfigurationError("p must be a positive integer", field="p")
        lo = np.atleast_1d(np.asarray(self.sigma_l, dtype=float))
        hi = np.atleast_1d(np.asarray(self.sigma_u, dtype=float))
        if not np.all(np.isfinite(lo)) or np.any(lo <= 0):
            raise ConfigurationError("sigma_l must be finite and positive", field="sigma_l")
        if not np.all(np.isfinite(hi)):
            raise ConfigurationError("sigma_u must be finite", field="sigma_u")
        try:
            ok = np.all(lo <= hi)
        except ValueError:
            raise ConfigurationError("sigma_l and sigma_u lengths differ", field="sigma_u") from None
        if not ok:
            raise ConfigurationError("sigma_l must not exceed sigma_u", field="sigma_u")
        if self.sigma_init not in SIGMA_INIT_RULES:
            raise ConfigurationError(f"sigma_init must be one of {SIGMA_INIT_RULES}", field="sigma_init")
        if self.tau < 0:
            raise ConfigurationError("tau must be nonnegative", field="tau")
        if self.delta_bar < 1:
            raise ConfigurationError("delta_bar must be at least 1", field="delta_bar")
        if self.j_max < 1:
            raise ConfigurationError("j_max must be at least 1", field="j_max")
        if self.subsolver not in SUBSOLVER_MODES:
            raise ConfigurationError(f"subsolver must be one of {SUBSOLVER_MODES}", field="subsolver")
        if self.subsolver == "exact" and self.p != 1:
            raise ConfigurationError("the exact subsolver requires p = 1", field="subsolver")

    def bounds(self, m):
        """``(sigma_l, sigma_u)`` broadcast to length ``m``."""
        try:
            lo = np.broadcast_to(np.asarray(self.sigma_l, dtype=float), (m,)).copy()
            hi = np.broadcast_to(np.asarray(self.sigma_u, dtype=float), (m,)).copy()
        except ValueError:
            raise ConfigurationError(f"sigma bounds do not broadcast to m={m}", field="sigma_l") from None
        return lo, hi

    def initial_sigma(self, m, warm=None):
        lo, hi = self.bounds(m)
        if self.sigma_init == "midpoint":
            return 0.5 * (lo + hi)
        if self.sigma_init == "warm" and warm is not None:
            return np.clip(np.asarray(warm, dtype=float), lo, hi)
        return lo

    @property
    def uses_exact(self):
        return self.p == 1 and self.subsolver in ("auto", "exact")


@dataclass(frozen=True)
class TrialRecord:
    """One evaluated trial point of a search."""

    j: int
    sigma: np.ndarray
    s: np.ndarray
    fx: np.ndarray
    in_Y: bool
    final: bool = False

    @property
    def step_norm(self):
        return float(np.linalg.norm(self.s))


@dataclass
class RSOutcome:
    """Result of one Regularized Search.

    ``Y`` holds the new points only (margin candidates in trial order, then
    the accepted point ``x + s``).
    """

    Y: list
    s: np.ndarray
    sigma: np.ndarray
    trials: list
    f_evals: int
    certificate: object = None
    k: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.Y[-1]


def sufficient_decrease_margin(s, sigma, eta, p):
    """``eta * ||s||^(p+1) / p! * sigma`` (componentwise)."""
    norm = float(np.linalg.norm(s))
    return eta * norm ** (p + 1) / math.factorial(p) * np.asarray(sigma, dtype=float)


def margin_candidate_test(fnew, Y_f, nu):
    """True iff every ``y`` in ``Y_f`` has a component with ``fnew_i <= y_i - nu_i``."""
    Y_f = np.asarray(Y_f, dtype=float)
    if Y_f.size == 0:
        return True
    Y_f = np.atleast_2d(Y_f)
    return bool(np.all(np.any(np.asarray(fnew) <= Y_f - np.asarray(nu), axis=1)))


def _step(oracle, x, sigma, params, G, options):
    if params.uses_exact:
        return solve_exact_p1(G, sigma, kkt_atol=options.kkt_atol)
    return solve_inexact(oracle, x, sigma, params.p, options=options, gradients=G)


def regularized_search(oracle, x, X, params, k=0, sigma0=None, gradients=None):
    """Run the Regularized Search from ``x`` against the archive snapshot ``X``.

    Parameters
    ----------
    oracle : ObjectiveOracle
    x : EvaluatedPoint
        Point to improve; should be a member of ``X``.
    X : Front or sequence of EvaluatedPoint
        Snapshot used for the margin test. Not modified.
    params : RSParams
    k : int
        Outer iteration index, used in origin tags.
    sigma0 : array_like, optional
        Warm-start value for ``sigma_init="warm"``.
    gradients : ndarray, optional
        Cached gradient matrix at ``x``.

    Returns
    -------
    RSOutcome

    Raises
    ------
    SearchError
        If no trial passes the sufficient-decrease test within ``j_max``
        trials. The trial log is attached.
    """
    m = oracle.m
    p = params.p
    sigma = params.initial_sigma(m, sigma0)
    G = oracle.gradients(x.x) if gradients is None else gradients
    options = SolverOptions(tau=params.tau, delta_bar=params.delta_bar, seed=params.solver_seed)
    points = list(X.points if isinstance(X, Front) else X)
    Y_f = [pt.fx for pt in points]
    new_points, trials = [], []
    for j in range(params.j_max):
        cert = _step(oracle, x.x, sigma, params, G, options)
        s = cert.s
        ft = oracle.eval(x.x + s)
        nu = sufficient_decrease_margin(s, sigma, params.eta, p)
        failing = ft > x.fx - nu
        if not failing.any():
            new_points.append(EvaluatedPoint(x.x + s, ft, f"rs_final({k})"))
            trials.append(TrialRecord(j, sigma.copy(), s, ft, True, final=True))
            return RSOutcome(new_points, s, sigma, trials, j + 1, cert, k)
        accepted = margin_candidate_test(ft, Y_f, nu)
        if accepted:
            new_points.append(EvaluatedPoint(x.x + s, ft, f"rs_trial({k},{j})"))
            Y_f.append(ft)
        trials.append(TrialRecord(j, sigma.copy(), s, ft, accepted))
        sigma = np.where(failing, sigma / params.gamma, sigma)
    raise SearchError(f"no sufficient decrease within j_max={params.j_max} trials", trials=trials)


def trials_to_csv(entries, m):
    """CSV text for ``(k, TrialRecord)`` pairs.

    Columns: k, j, sigma_0..sigma_{m-1}, step_norm, f_0..f_{m-1}, accepted.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["k", "j"] + [f"sigma_{i}" for i in range(m)] + ["step_norm"] + [f"f_{i}" for i in range(m)] + ["accepted"]
    )
    for k, t in entries:
        writer.writerow(
            [k, t.j] + [fmt_float(v) for v in t.sigma] + [fmt_float(t.step_norm)]
            + [fmt_float(v) for v in t.fx] + [int(t.in_Y)]
        )
    return buf.getvalue()
