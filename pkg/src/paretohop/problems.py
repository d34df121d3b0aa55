"""Objective oracles and the built-in library of test problems.

An oracle exposes F, the gradients and two contraction levels of the
derivative tensors::

    tensor_contract(x, i, j, s, r=j)     -> nabla^j f_i(x)[s]^j        (scalar)
    tensor_contract(x, i, j, s, r=j-1)   -> nabla^j f_i(x)[s]^(j-1)    (vector)

Full tensors are never formed. Custom problems subclass :class:`ObjectiveOracle`
and implement ``_values``, ``_gradient`` and ``_contract``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, ConfigurationError, InputError

__all__ = [
    "ObjectiveOracle",
    "CountingOracle",
    "ProblemSpec",
    "Quad2",
    "Jos1",
    "Fonseca",
    "Cubic2",
    "BUILTIN_PROBLEMS",
    "builtin_problem",
    "finite_diff_check",
]


class ObjectiveOracle:
    """Vector objective F: R^n -> R^m with analytic derivatives up to ``p_max``.

    Parameters
    ----------
    n, m : int
        Decision and objective space dimensions.
    p_max : int
        Highest derivative order available.
    lipschitz : dict, optional
        Maps a derivative order p to the vector of Lipschitz constants of the
        p-th derivatives of each objective. Orders without a known constant
        are simply absent.
    f_min : array_like, optional
        Known infima of each objective.
    """

    def __init__(self, n, m, p_max, lipschitz=None, f_min=None):
        if n < 1 or m < 1 or p_max < 1:
            raise ConfigurationError("n, m and p_max must be positive")
        self.n = int(n)
        self.m = int(m)
        self.p_max = int(p_max)
        self.lipschitz = {int(p): np.asarray(v, dtype=float) for p, v in (lipschitz or {}).items()}
        self.f_min = None if f_min is None else np.asarray(f_min, dtype=float)

    # -- subclass hooks -------------------------------------------------
    def _values(self, x):
        raise NotImplementedError

    def _gradient(self, x, i):
        raise NotImplementedError

    def _contract(self, x, i, j, s):
        """Return ``(nabla^j f_i(x)[s]^j, nabla^j f_i(x)[s]^(j-1))`` for j >= 2."""
        raise NotImplementedError

    # -- public API -----------------------------------------------------
    def _check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise InputError(f"expected a point of shape ({self.n},), got {x.shape}")
        return x

    def eval(self, x):
        """Objective vector F(x), shape (m,)."""
        return np.asarray(self._values(self._check_x(x)), dtype=float)

    def grad(self, x, i):
        """Gradient of objective ``i`` at ``x``, shape (n,)."""
        return np.asarray(self._gradient(self._check_x(x), i), dtype=float)

    def gradients(self, x):
        """All gradients stacked row-wise, shape (m, n)."""
        x = self._check_x(x)
        return np.stack([np.asarray(self._gradient(x, i), dtype=float) for i in range(self.m)])

    def tensor_contract(self, x, i, j, s, r):
        """Contract the j-th derivative of objective ``i`` at ``x`` with ``s`` r times.

        Only ``r == j`` (scalar) and ``r == j - 1`` (vector) are supported.
        """
        if not 1 <= j <= self.p_max:
            raise CapabilityError(f"derivative order {j} outside 1..{self.p_max}")
        if r not in (j, j - 1):
            raise CapabilityError("only r = j and r = j - 1 contractions are available")
        x = self._check_x(x)
        s = np.asarray(s, dtype=float)
        if j == 1:
            g = np.asarray(self._gradient(x, i), dtype=float)
            return float(g @ s) if r == 1 else g
        scalar, vector = self._contract(x, i, j, s)
        return float(scalar) if r == j else np.asarray(vector, dtype=float)

    def lipschitz_constants(self, p):
        """Lipschitz constants of the order-``p`` derivatives, or None if unknown."""
        return self.lipschitz.get(int(p))


class CountingOracle(ObjectiveOracle):
    """Wrap an oracle and count F, gradient and tensor evaluations (thread safe)."""

    def __init__(self, inner):
        self.inner = inner
        self.n, self.m, self.p_max = inner.n, inner.m, inner.p_max
        self.lipschitz = inner.lipschitz
        self.f_min = inner.f_min
        self.f_evals = 0
        self.grad_evals = 0
        self.tensor_evals = 0
        self._lock = threading.Lock()

    def _bump(self, name, k=1):
        with self._lock:
            setattr(self, name, getattr(self, name) + k)

    def eval(self, x):
        self._bump("f_evals")
        return self.inner.eval(x)

    def grad(self, x, i):
        self._bump("grad_evals")
        return self.inner.grad(x, i)

    def gradients(self, x):
        self._bump("grad_evals", self.m)
        return self.inner.gradients(x)

    def tensor_contract(self, x, i, j, s, r):
        self._bump("grad_evals" if j == 1 and r == 0 else "tensor_evals")
        return self.inner.tensor_contract(x, i, j, s, r)

    def lipschitz_constants(self, p):
        return self.inner.lipschitz_constants(p)


@dataclass
class ProblemSpec:
    """A named problem with its oracle, start points and reporting reference point."""

    name: str
    oracle: ObjectiveOracle
    default_start_points: list = field(default_factory=list)
    reference_point_hint: np.ndarray | None = None

    def __post_init__(self):
        self.default_start_points = [np.asarray(x, dtype=float) for x in self.default_start_points]
        if self.reference_point_hint is None:
            values = np.array([self.oracle.eval(x) for x in self.default_start_points])
            self.reference_point_hint = values.max(axis=0) + 1.0
        self.reference_point_hint = np.asarray(self.reference_point_hint, dtype=float)
        for x in self.default_start_points:
            if not np.all(self.oracle.eval(x) < self.reference_point_hint):
                raise ConfigurationError(f"reference point of {self.name} is not dominated by F({x})")


class Quad2(ObjectiveOracle):
    """Two convex quadratics f_i(x) = 1/2 (x - a_i)^T A_i (x - a_i)."""

    def __init__(self, n=2, A=None, a=None):
        if A is None:
            ones = np.ones((n, n)) / n
            A = [np.eye(n) + 0.5 * ones, 2.0 * np.eye(n) - 0.5 * ones]
        if a is None:
            a = [np.zeros(n), np.ones(n)]
        self.A = [np.asarray(Ai, dtype=float).reshape(n, n) for Ai in A]
        self.a = [np.asarray(ai, dtype=float).reshape(n) for ai in a]
        for Ai in self.A:
            if not np.allclose(Ai, Ai.T) or np.linalg.eigvalsh(Ai).min() <= 0:
                raise ConfigurationError("quad2 matrices must be symmetric positive definite")
        L1 = [np.linalg.norm(Ai, 2) for Ai in self.A]
        super().__init__(n, 2, 3, lipschitz={1: L1, 2: [0.0, 0.0], 3: [0.0, 0.0]}, f_min=[0.0, 0.0])

    def _values(self, x):
        return [0.5 * (x - ai) @ Ai @ (x - ai) for Ai, ai in zip(self.A, self.a)]

    def _gradient(self, x, i):
        return self.A[i] @ (x - self.a[i])

    def _contract(self, x, i, j, s):
        if j == 2:
            As = self.A[i] @ s
            return s @ As, As
        return 0.0, np.zeros(self.n)


class Jos1(ObjectiveOracle):
    """f_1 = ||x||^2 / n, f_2 = ||x - 2||^2 / n; Pareto set is the segment [0, 2*1]."""

    def __init__(self, n=2):
        L1 = 2.0 / n
        super().__init__(n, 2, 3, lipschitz={1: [L1, L1], 2: [0.0, 0.0], 3: [0.0, 0.0]}, f_min=[0.0, 0.0])
        self._centers = (np.zeros(n), np.full(n, 2.0))

    def _values(self, x):
        return [np.sum((x - c) ** 2) / self.n for c in self._centers]

    def _gradient(self, x, i):
        return 2.0 * (x - self._centers[i]) / self.n

    def _contract(self, x, i, j, s):
        if j == 2:
            return 2.0 * (s @ s) / self.n, 2.0 * s / self.n
        return 0.0, np.zeros(self.n)


class Fonseca(ObjectiveOracle):
    """Fonseca-Fleming: f_{1,2} = 1 - exp(-||x -+ 1/sqrt(n)||^2). No Lipschitz data."""

    def __init__(self, n=2):
        super().__init__(n, 2, 3, lipschitz=None, f_min=[0.0, 0.0])
        c = 1.0 / np.sqrt(n)
        self._centers = (np.full(n, c), np.full(n, -c))

    def _values(self, x):
        return [1.0 - np.exp(-np.sum((x - c) ** 2)) for c in self._centers]

    def _gradient(self, x, i):
        u = x - self._centers[i]
        return 2.0 * np.exp(-(u @ u)) * u

    def _contract(self, x, i, j, s):
        # Derivatives of t -> 1 - exp(-(a + 2bt + ct^2)) at t = 0.
        u = x - self._centers[i]
        e = np.exp(-(u @ u))
        b = u @ s
        c = s @ s
        if j == 2:
            return (2.0 * c - 4.0 * b * b) * e, (2.0 * s - 4.0 * b * u) * e
        if j == 3:
            return (8.0 * b**3 - 12.0 * b * c) * e, (8.0 * b * b * u - 4.0 * c * u - 8.0 * b * s) * e
        raise CapabilityError(f"fonseca provides derivatives up to order 3, not {j}")


class Cubic2(ObjectiveOracle):
    """f_i = 1/2 ||x - a_i||^2 + (kappa_i / 6) sum_k (x - a_i)_k^3.

    The third derivative is the diagonal tensor kappa_i * I, so the Hessian is
    Lipschitz with constant kappa_i. The objectives are unbounded below, hence
    no ``f_min``.
    """

    def __init__(self, n=2, kappa=(0.3, 0.5), a=None):
        if a is None:
            a = [np.zeros(n), np.ones(n)]
        self.a = [np.asarray(ai, dtype=float).reshape(n) for ai in a]
        self.kappa = np.asarray(kappa, dtype=float)
        if self.kappa.shape != (2,) or np.any(self.kappa < 0):
            raise ConfigurationError("cubic2 needs two nonnegative cubic coefficients")
        super().__init__(n, 2, 3, lipschitz={2: self.kappa, 3: [0.0, 0.0]})

    def _values(self, x):
        out = []
        for k, ai in zip(self.kappa, self.a):
            d = x - ai
            out.append(0.5 * (d @ d) + k / 6.0 * np.sum(d**3))
        return out

    def _gradient(self, x, i):
        d = x - self.a[i]
        return d + 0.5 * self.kappa[i] * d * d

    def _contract(self, x, i, j, s):
        k = self.kappa[i]
        if j == 2:
            d = x - self.a[i]
            Hs = s + k * d * s
            return s @ Hs, Hs
        if j == 3:
            return k * np.sum(s**3), k * s * s
        raise CapabilityError(f"cubic2 provides derivatives up to order 3, not {j}")


def _quad2_spec(n=2, **params):
    oracle = Quad2(n, **params)
    return ProblemSpec("quad2", oracle, [np.full(n, 3.0)])


def _jos1_spec(n=2):
    return ProblemSpec("jos1", Jos1(n), [np.full(n, 3.0)])


def _fonseca_spec(n=2):
    return ProblemSpec("fonseca", Fonseca(n), [np.linspace(-0.8, 0.9, n)])


def _cubic2_spec(n=2, **params):
    return ProblemSpec("cubic2", Cubic2(n, **params), [np.linspace(1.5, -0.5, n)])


BUILTIN_PROBLEMS = {
    "quad2": _quad2_spec,
    "jos1": _jos1_spec,
    "fonseca": _fonseca_spec,
    "cubic2": _cubic2_spec,
}


def builtin_problem(name, n=2, **params):
    """Build one of the named test problems.

    Extra keyword arguments are forwarded to the problem constructor
    (``A``/``a`` for quad2, ``kappa``/``a`` for cubic2).
    """
    try:
        factory = BUILTIN_PROBLEMS[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_PROBLEMS))
        raise ConfigurationError(f"unknown problem {name!r}; choose one of {known}", field="problem") from None
    if int(n) < 1:
        raise ConfigurationError("n must be a positive integer", field="n")
    return factory(int(n), **params)


def _probe_directions(n):
    dirs = [np.eye(n)[k] for k in range(n)]
    dirs.append(np.linspace(1.0, -0.5, n) / max(np.linalg.norm(np.linspace(1.0, -0.5, n)), 1e-300))
    return dirs


def finite_diff_check(oracle, x, i, j, h=1e-6):
    """Largest deviation between order-``j`` contractions and central differences of order ``j - 1``.

    For ``j = 1`` the gradient is compared with central differences of f along
    the coordinate axes. For ``j >= 2`` both contraction levels are compared,
    along the coordinate axes and one mixed direction ``s``::

        nabla^j f[s]^j      ~  (nabla^{j-1} f(x+hs)[s]^{j-1} - nabla^{j-1} f(x-hs)[s]^{j-1}) / 2h
        nabla^j f[s]^{j-1}  ~  (nabla^{j-1} f(x+hs)[s]^{j-2} - nabla^{j-1} f(x-hs)[s]^{j-2}) / 2h
    """
    if not 1 <= j <= oracle.p_max:
        raise CapabilityError(f"derivative order {j} outside 1..{oracle.p_max}")
    if h <= 0:
        raise ConfigurationError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    n = oracle.n
    if j == 1:
        g = oracle.grad(x, i)
        fd = np.empty(n)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            fd[k] = (oracle.eval(x + e)[i] - oracle.eval(x - e)[i]) / (2.0 * h)
        return float(np.max(np.abs(g - fd)))

    def lower(point, s, r):
        return oracle.tensor_contract(point, i, j - 1, s, r)

    worst = 0.0
    for s in _probe_directions(n):
        scalar = oracle.tensor_contract(x, i, j, s, j)
        vector = oracle.tensor_contract(x, i, j, s, j - 1)
        fd_scalar = (lower(x + h * s, s, j - 1) - lower(x - h * s, s, j - 1)) / (2.0 * h)
        fd_vector = (lower(x + h * s, s, j - 2) - lower(x - h * s, s, j - 2)) / (2.0 * h)
        worst = max(worst, abs(scalar - fd_scalar), float(np.max(np.abs(vector - fd_vector))))
    return worst
