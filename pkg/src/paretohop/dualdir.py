"""Common steepest-descent direction and the Pareto-stationarity measure.

The direction ``v(x)`` minimises ``max_i g_i^T v + 1/2 ||v||^2``. It is
obtained from the dual problem, a minimum-norm point of the convex hull of
the gradients::

    lambda* = argmin { 1/2 ||G^T lambda||^2 : lambda in unit simplex },
    v(x)    = -G^T lambda*.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InputError

__all__ = [
    "DirectionResult",
    "project_simplex",
    "simplex_kkt_residual",
    "common_descent_direction",
    "stationarity_measure",
]

ACTIVE_SET_MAX_M = 3
PG_TOL = 1e-10
PG_MAX_ITER = 10_000


@dataclass(frozen=True)
class DirectionResult:
    """Solution of the simplex-constrained dual.

    Attributes
    ----------
    v : ndarray, shape (n,)
        Common descent direction, ``-G^T lam``.
    lam : ndarray, shape (m,)
        Simplex weights (nonnegative, summing to one).
    dual_value : float
        ``-1/2 ||G^T lam||^2``.
    kkt_residual : float
        Projected-gradient residual of the simplex QP at ``lam``.
    """

    v: np.ndarray
    lam: np.ndarray
    dual_value: float
    kkt_residual: float

    @property
    def norm(self):
        return float(np.linalg.norm(self.v))


def project_simplex(c):
    """Euclidean projection of ``c`` onto the unit simplex (sort-based)."""
    c = np.asarray(c, dtype=float)
    a = np.sort(c)[::-1]
    thresholds = (np.cumsum(a) - 1.0) / np.arange(1, c.size + 1)
    k = np.nonzero(a > thresholds)[0][-1]
    return np.maximum(c - thresholds[k], 0.0)


def simplex_kkt_residual(Q, lam):
    """``||lam - P(lam - Q lam)||`` for the QP ``min 1/2 lam^T Q lam`` over the simplex."""
    return float(np.linalg.norm(lam - project_simplex(lam - Q @ lam)))


def _normalise(lam):
    lam = np.maximum(lam, 0.0)
    return lam / lam.sum()


def _face_min_norm(G, support):
    """Minimum-norm point of the affine hull of the rows ``G[support]``.

    Parametrises ``lam = e_0 + sum_k beta_k (e_k - e_0)`` and solves the
    least-squares problem directly on G (no normal equations).
    """
    m = G.shape[0]
    lam = np.zeros(m)
    first = support[0]
    if len(support) == 1:
        lam[first] = 1.0
        return lam
    D = (G[list(support[1:])] - G[first]).T
    beta, *_ = np.linalg.lstsq(D, -G[first], rcond=None)
    lam[list(support[1:])] = beta
    lam[first] = 1.0 - beta.sum()
    return lam


def _active_set(G):
    m = G.shape[0]
    best, best_norm = None, np.inf
    for size in range(1, m + 1):
        for support in combinations(range(m), size):
            lam = _face_min_norm(G, support)
            if lam.min() < -1e-12:
                continue
            lam = _normalise(lam)
            norm = np.linalg.norm(G.T @ lam)
            if best is None or norm < best_norm - 1e-15 * max(1.0, best_norm):
                best, best_norm = lam, norm
    return best


def _projected_gradient(G, tol=PG_TOL, max_iter=PG_MAX_ITER):
    Q = G @ G.T
    step = 1.0 / max(np.linalg.norm(Q, 2), 1e-300)
    lam = np.full(G.shape[0], 1.0 / G.shape[0])
    for _ in range(max_iter):
        nxt = project_simplex(lam - step * (Q @ lam))
        if np.linalg.norm(nxt - lam) <= tol * step:
            lam = nxt
            break
        lam = nxt
    return lam


def common_descent_direction(gradients, method="auto"):
    """Solve the dual QP for the gradient rows ``gradients`` (shape (m, n)).

    Parameters
    ----------
    gradients : array_like, shape (m, n)
    method : {"auto", "active_set", "projected_gradient"}
        ``auto`` uses exhaustive active-set enumeration for m <= 3 and
        projected gradient with step ``1/||G G^T||`` otherwise.

    Returns
    -------
    DirectionResult
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if G.ndim != 2 or G.shape[0] < 1:
        raise InputError("gradients must be a non-empty (m, n) matrix")
    if not np.all(np.isfinite(G)):
        raise InputError("gradients contain non-finite entries")
    if method == "auto":
        method = "active_set" if G.shape[0] <= ACTIVE_SET_MAX_M else "projected_gradient"
    if G.shape[0] == 1:
        lam = np.ones(1)
    elif method == "active_set":
        lam = _active_set(G)
    elif method == "projected_gradient":
        lam = _projected_gradient(G)
    else:
        raise InputError(f"unknown method {method!r}")
    w = G.T @ lam
    return DirectionResult(
        v=-w,
        lam=lam,
        dual_value=-0.5 * float(w @ w),
        kkt_residual=simplex_kkt_residual(G @ G.T, lam),
    )


def stationarity_measure(oracle, x):
    """``||v(x)||``; zero exactly at Pareto-stationary points."""
    return common_descent_direction(oracle.gradients(x)).norm
