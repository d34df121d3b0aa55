"""Step computation for the regularised model, with checkable certificates.

Two solvers are provided:

* :func:`solve_exact_p1` -- global minimiser for p = 1 through the dual
  ``min_{lam in simplex} ||G^T lam||^2 / (4 sigma^T lam)`` and the primal
  recovery ``s = -G^T lam / (2 sigma^T lam)``.
* :func:`solve_inexact` -- multistart local minimisation of
  ``max_i m_i(x, s)`` on its epigraph form, for any p. The returned step
  satisfies the approximate optimality conditions

      (a) max_i m_i(x, s) <= 0
      (b) lam >= 0 and 1 <= sum(lam) <= delta_bar
      (c) ||sum_i lam_i grad_s m_i(x, s)|| <= tau ||s||^p + kkt_atol
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from scipy.optimize import minimize, minimize_scalar, root

from .dualdir import common_descent_direction, project_simplex
from .errors import InputError, SubproblemError
from .model import as_reg_vector, kkt_residual, model_eval

__all__ = [
    "StepCertificate",
    "SolverOptions",
    "solve_exact_p1",
    "solve_inexact",
    "verify_certificate",
    "exact_p1_model",
]

EXACT_P1 = "exact_p1"
INEXACT = "inexact"
EXACT_KKT_TOL = 1e-8
MASS_TOL = 1e-12


@dataclass(frozen=True)
class StepCertificate:
    """A step together with the multipliers that certify it."""

    s: np.ndarray
    lam: np.ndarray
    sigma: np.ndarray
    mode: str
    p: int
    model_max_value: float
    kkt_residual: float
    tau: float = 0.0
    delta_bar: float = 1.0
    kkt_atol: float = 1e-10
    duality_gap: float = 0.0

    @property
    def multiplier_mass(self):
        return float(np.sum(np.abs(self.lam)))

    @property
    def step_norm(self):
        return float(np.linalg.norm(self.s))


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs of the step subsolvers."""

    tau: float = 1e-2
    delta_bar: float = 2.0
    eps_stat: float = 1e-12
    kkt_atol: float = 1e-10
    cauchy_scalings: tuple = (0.1, 1.0, 10.0)
    n_random: int = 5
    max_iter: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.tau < 0:
            raise InputError("tau must be nonnegative")
        if self.delta_bar < 1:
            raise InputError("delta_bar must be at least 1")


# ---------------------------------------------------------------------------
# exact p = 1
# ---------------------------------------------------------------------------


def exact_p1_model(G, sigma, s):
    """Values of ``g_i^T s + sigma_i ||s||^2`` for every row of ``G``."""
    return G @ s + sigma * float(s @ s)


def _ratio(Q, sigma, lam):
    return float(lam @ Q @ lam) / (4.0 * float(sigma @ lam))


ENUM_MAX_M = 10


def _simplex_qp_enum(H, c):
    """Exact ``min 1/2 lam^T H lam + c^T lam`` over the simplex by face enumeration.

    On each face the equality-constrained KKT system is solved in the
    least-squares sense; the best feasible candidate is optimal because the
    minimiser lies in the relative interior of some face.
    """
    m = c.size
    best, best_val = None, np.inf
    for size in range(1, m + 1):
        for support in combinations(range(m), size):
            idx = list(support)
            K = np.zeros((size + 1, size + 1))
            K[:size, :size] = H[np.ix_(idx, idx)]
            K[:size, size] = K[size, :size] = 1.0
            sol, *_ = np.linalg.lstsq(K, np.concatenate([-c[idx], [1.0]]), rcond=None)
            if sol[:size].min() < -1e-13:
                continue
            lam = np.zeros(m)
            lam[idx] = np.maximum(sol[:size], 0.0)
            lam /= lam.sum()
            val = 0.5 * lam @ H @ lam + c @ lam
            if best is None or val < best_val:
                best, best_val = lam, val
    return best


def _simplex_qp_pg(H, c, lam, max_iter=10_000):
    step = 1.0 / max(np.linalg.norm(H, 2), 1e-300)
    for _ in range(max_iter):
        nxt = project_simplex(lam - step * (H @ lam + c))
        if np.linalg.norm(nxt - lam) <= 1e-16:
            return nxt
        lam = nxt
    return lam


def _min_ratio_pair(Q, sigma):
    """Closed form for m = 2: minimise over lam = (t, 1 - t), t in [0, 1].

    With ``q(t) = a t^2 + b t + c`` and ``l(t) = d t + e`` the stationarity
    condition ``q' l - q l' = 0`` is the quadratic ``a d t^2 + 2 a e t + (b e - c d) = 0``.
    """
    a = Q[0, 0] - 2.0 * Q[0, 1] + Q[1, 1]
    b = 2.0 * (Q[0, 1] - Q[1, 1])
    c = Q[1, 1]
    d = sigma[0] - sigma[1]
    e = sigma[1]
    cands = [0.0, 1.0]
    coeffs = np.array([a * d, 2.0 * a * e, b * e - c * d])
    if np.any(coeffs != 0.0):
        for r in np.roots(np.trim_zeros(coeffs, "f")):
            if abs(r.imag) <= 1e-14 * max(1.0, abs(r.real)) and 0.0 < r.real < 1.0:
                cands.append(float(r.real))
    lams = [np.array([t, 1.0 - t]) for t in cands]
    return min(lams, key=lambda lam: _ratio(Q, sigma, lam))


def _min_ratio(Q, sigma, max_iter=100):
    """Dinkelbach iterations for ``min ||G^T lam||^2 / (4 sigma^T lam)`` on the simplex."""
    m = sigma.size
    if m == 2:
        return _min_ratio_pair(Q, sigma)
    lam = np.full(m, 1.0 / m)
    theta = _ratio(Q, sigma, lam)
    for _ in range(max_iter):
        H, c = 0.5 * Q, -theta * sigma
        nxt = _simplex_qp_enum(H, c) if m <= ENUM_MAX_M else _simplex_qp_pg(H, c, lam)
        theta_next = _ratio(Q, sigma, nxt)
        if theta_next > theta:
            break
        lam, done = nxt, theta_next == theta
        theta = theta_next
        if done:
            break
    return lam


def solve_exact_p1(gradients, sigma, kkt_atol=1e-10):
    """Global minimiser of ``max_i g_i^T s + sigma_i ||s||^2``.

    Parameters
    ----------
    gradients : array_like, shape (m, n)
    sigma : array_like
        Regularisation vector, strictly positive.

    Returns
    -------
    StepCertificate
        Mode ``exact_p1``; ``lam`` lies on the unit simplex.
    """
    G = np.atleast_2d(np.asarray(gradients, dtype=float))
    if not np.all(np.isfinite(G)):
        raise InputError("gradients contain non-finite entries")
    m, n = G.shape
    sigma = as_reg_vector(sigma, m)

    def certificate(s, lam, gap=0.0):
        vals = exact_p1_model(G, sigma, s)
        res = float(np.linalg.norm(G.T @ lam + 2.0 * float(sigma @ lam) * s))
        return StepCertificate(
            s=s, lam=lam, sigma=sigma, mode=EXACT_P1, p=1, model_max_value=float(vals.max()),
            kkt_residual=res, tau=0.0, delta_bar=1.0, kkt_atol=kkt_atol, duality_gap=gap,
        )

    if not np.any(G):
        lam = np.zeros(m)
        lam[0] = 1.0
        return certificate(np.zeros(n), lam)
    if m == 1:
        lam = np.ones(1)
    else:
        lam = _min_ratio(G @ G.T, sigma)
    w = G.T @ lam
    s = -w / (2.0 * float(sigma @ lam))
    vals = exact_p1_model(G, sigma, s)
    if vals.max() > 0.0:
        # Only reachable at (numerically) stationary points, where s = 0 is optimal.
        s = np.zeros(n)
        vals = np.zeros(m)
    gap = float(vals.max() - lam @ vals)
    return certificate(s, lam, max(gap, 0.0))


# ---------------------------------------------------------------------------
# inexact, any p
# ---------------------------------------------------------------------------


class _ModelCache:
    """Memoises model evaluations for the optimiser's repeated calls at one s."""

    def __init__(self, oracle, x, sigma, p):
        self.oracle, self.x, self.sigma, self.p = oracle, x, sigma, p
        self._zeros = np.zeros(oracle.m)
        self._key = None
        self._val = None

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        key = s.tobytes()
        if key != self._key:
            self._val = model_eval(self.oracle, self.x, s, self.sigma, self.p, fx=self._zeros)
            self._key = key
        return self._val


def _active_multipliers(ev, tols=(1e-12, 1e-10, 1e-8, 1e-6, 1e-4)):
    """Simplex multipliers on near-active pieces minimising the KKT residual."""
    vals = ev.values
    top = vals.max()
    scale = max(1.0, abs(top))
    best_lam, best_res = None, np.inf
    seen = set()
    for tol in tols:
        active = tuple(np.nonzero(vals >= top - tol * scale)[0])
        if active in seen:
            continue
        seen.add(active)
        sub = common_descent_direction(ev.gradients[list(active)])
        lam = np.zeros(vals.size)
        lam[list(active)] = sub.lam
        res = kkt_residual(ev, lam)
        if res < best_res:
            best_lam, best_res = lam, res
    return best_lam, best_res


def _cauchy_step(model, v):
    """Minimise the model along the common descent direction."""

    def phi(alpha):
        return model(alpha * v).max_value

    hi = 1.0
    for _ in range(200):
        if phi(hi) > 0.0:
            break
        hi *= 2.0
    res = minimize_scalar(phi, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-12 * hi})
    alpha = res.x if phi(res.x) < 0.0 else 0.0
    return alpha * v


def _epigraph_descent(model, s0, max_iter):
    n = s0.size

    def objective(z):
        return z[n]

    def objective_jac(z):
        g = np.zeros(n + 1)
        g[n] = 1.0
        return g

    def cons(z):
        return z[n] - model(z[:n]).values

    def cons_jac(z):
        ev = model(z[:n])
        return np.hstack([-ev.gradients, np.ones((ev.values.size, 1))])

    z0 = np.concatenate([s0, [model(s0).max_value]])
    res = minimize(
        objective, z0, jac=objective_jac, method="SLSQP",
        constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
        options={"maxiter": max_iter, "ftol": 1e-15},
    )
    s = np.asarray(res.x[:n], dtype=float)
    return s if np.all(np.isfinite(s)) else s0


def _kkt_polish(model, s, lam):
    """Newton-type solve of the KKT system restricted to the support of ``lam``."""
    support = np.nonzero(lam > 0)[0]
    n, a = s.size, support.size

    def system(z):
        ss, ll, t = z[:n], z[n:n + a], z[n + a]
        ev = model(ss)
        return np.concatenate([
            ev.gradients[support].T @ ll,
            ev.values[support] - t,
            [ll.sum() - 1.0],
        ])

    z0 = np.concatenate([s, lam[support], [model(s).max_value]])
    try:
        res = root(system, z0, method="hybr", options={"xtol": 1e-15})
    except (ValueError, np.linalg.LinAlgError):
        return s
    out = res.x[:n]
    return out if np.all(np.isfinite(out)) else s


def _certify(model, s, sigma, p, opts):
    ev = model(s)
    lam, res = _active_multipliers(ev)
    return StepCertificate(
        s=np.array(s, dtype=float), lam=lam, sigma=sigma, mode=INEXACT, p=p,
        model_max_value=ev.max_value, kkt_residual=res, tau=opts.tau,
        delta_bar=opts.delta_bar, kkt_atol=opts.kkt_atol,
    )


def _passes(cert):
    return (
        cert.model_max_value <= 0.0
        and cert.kkt_residual <= cert.tau * cert.step_norm**cert.p + cert.kkt_atol
    )


def solve_inexact(oracle, x, sigma, p, tau=None, delta_bar=None, options=None, gradients=None):
    """Approximate minimiser of ``max_i m_i(x, s)`` with a certificate.

    Starting points are the Cauchy step along ``v(x)`` scaled by 0.1, 1 and 10
    plus seeded random perturbations of it; each start is refined by SLSQP on
    the epigraph problem and polished with a Newton solve of the KKT system.
    Among certified end points the lowest model value wins, ties going to the
    earlier start.

    Raises
    ------
    SubproblemError
        If no start yields a certified step, or the only certified step is zero
        at a point that is not stationary.
    """
    opts = options or SolverOptions()
    if tau is not None or delta_bar is not None:
        opts = replace(
            opts,
            tau=opts.tau if tau is None else tau,
            delta_bar=opts.delta_bar if delta_bar is None else delta_bar,
        )
    x = np.asarray(x, dtype=float)
    sigma = as_reg_vector(sigma, oracle.m)
    G = oracle.gradients(x) if gradients is None else np.asarray(gradients, dtype=float)
    direction = common_descent_direction(G)
    model = _ModelCache(oracle, x, sigma, p)
    if direction.norm <= opts.eps_stat:
        lam = direction.lam if np.any(G) else np.eye(oracle.m)[0]
        ev = model(np.zeros(oracle.n))
        return StepCertificate(
            s=np.zeros(oracle.n), lam=lam, sigma=sigma, mode=INEXACT, p=p,
            model_max_value=ev.max_value, kkt_residual=kkt_residual(ev, lam),
            tau=opts.tau, delta_bar=opts.delta_bar, kkt_atol=opts.kkt_atol,
        )

    sc = _cauchy_step(model, direction.v)
    starts = [k * sc for k in opts.cauchy_scalings]
    rng = np.random.default_rng(opts.seed)
    radius = max(np.linalg.norm(sc), 1e-8)
    for _ in range(opts.n_random):
        starts.append(sc + 0.5 * radius * rng.standard_normal(oracle.n) / np.sqrt(oracle.n))

    best, best_any = None, None
    for s0 in starts:
        s1 = _epigraph_descent(model, s0, opts.max_iter)
        cand = [_certify(model, s1, sigma, p, opts)]
        if cand[0].lam is not None:
            cand.append(_certify(model, _kkt_polish(model, s1, cand[0].lam), sigma, p, opts))
        for cert in cand:
            if best_any is None or cert.kkt_residual < best_any.kkt_residual:
                best_any = cert
            if not _passes(cert) or cert.step_norm == 0.0:
                continue
            if best is None or cert.model_max_value < best.model_max_value:
                best = cert
    if best is None:
        raise SubproblemError("no start produced a certified step; raise sigma or loosen tau", best=best_any)
    return best


def verify_certificate(oracle, x, cert, p=None, value_atol=0.0):
    """Recompute the certificate conditions from ``s`` and ``lam`` alone.

    Returns True iff (a) the model max is <= ``value_atol``, (b) the
    multipliers are nonnegative with mass in [1, delta_bar] and (c) the KKT
    residual is at most ``tau ||s||^p + kkt_atol``. Exact p = 1 certificates
    must additionally have simplex multipliers and residual <= 1e-8.
    """
    p = cert.p if p is None else p
    s = np.asarray(cert.s, dtype=float)
    lam = np.asarray(cert.lam, dtype=float)
    if lam.shape != (oracle.m,) or s.shape != (oracle.n,):
        return False
    ev = model_eval(oracle, x, s, cert.sigma, p, fx=np.zeros(oracle.m))
    mass = float(np.sum(np.abs(lam)))
    res = kkt_residual(ev, lam)
    ok = (
        ev.max_value <= value_atol
        and bool(np.all(lam >= 0.0))
        and 1.0 - MASS_TOL <= mass <= cert.delta_bar + MASS_TOL
        and res <= cert.tau * float(np.linalg.norm(s)) ** p + cert.kkt_atol
    )
    if cert.mode == EXACT_P1:
        ok = ok and p == 1 and abs(lam.sum() - 1.0) <= MASS_TOL and res <= EXACT_KKT_TOL
    return bool(ok)
