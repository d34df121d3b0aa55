"""Regularised p-th order Taylor models of each objective.

For step ``s`` and regularisation vector ``sigma``::

    m_i(x, s) = sum_{j=1..p} (1/j!) D^j f_i(x)[s]^j + sigma_i / p! * ||s||^(p+1)
    grad_s m_i = sum_{j=1..p} (1/(j-1)!) D^j f_i(x)[s]^(j-1)
                 + sigma_i (p+1)/p! * ||s||^(p-1) s
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, InputError

__all__ = ["ModelEval", "as_reg_vector", "model_eval", "kkt_residual"]


def as_reg_vector(sigma, m):
    """Validate and broadcast a regularisation vector to shape (m,)."""
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (m,)).copy()
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise InputError("regularisation parameters must be finite and strictly positive")
    return sigma


@dataclass(frozen=True)
class ModelEval:
    """Model values and s-gradients at one step.

    ``values[i]`` is m_i(x, s), ``gradients[i]`` its gradient in s and
    ``taylor[i]`` the truncated Taylor value T_i(x, s) (includes f_i(x)).
    """

    values: np.ndarray
    gradients: np.ndarray
    taylor: np.ndarray

    @property
    def max_value(self):
        return float(np.max(self.values))


def _vector_sum(terms):
    # Neumaier compensated summation, elementwise over the term vectors.
    total = np.zeros_like(terms[0])
    comp = np.zeros_like(terms[0])
    for t in terms:
        new = total + t
        big = np.abs(total) >= np.abs(t)
        comp += np.where(big, (total - new) + t, (t - new) + total)
        total = new
    return total + comp


def model_eval(oracle, x, s, sigma, p, fx=None):
    """Evaluate every m_i(x, s), its s-gradient and the Taylor value.

    Parameters
    ----------
    oracle : ObjectiveOracle
    x, s : array_like, shape (n,)
    sigma : array_like
        Regularisation vector (scalar broadcast allowed).
    p : int
        Model order, at most ``oracle.p_max``.
    fx : array_like, optional
        Cached F(x); evaluated through the oracle if omitted.
    """
    if not 1 <= p <= oracle.p_max:
        raise CapabilityError(f"model order {p} exceeds the oracle's p_max={oracle.p_max}")
    m = oracle.m
    sigma = as_reg_vector(sigma, m)
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    norm = float(np.linalg.norm(s))
    reg_scale = norm ** (p - 1) if norm > 0.0 else 0.0
    fact_p = math.factorial(p)
    if fx is None:
        fx = oracle.eval(x)
    values = np.empty(m)
    taylor = np.empty(m)
    grads = np.empty((m, oracle.n))
    for i in range(m):
        scalars, vectors = [], []
        for j in range(1, p + 1):
            scalars.append(oracle.tensor_contract(x, i, j, s, j) / math.factorial(j))
            vectors.append(oracle.tensor_contract(x, i, j, s, j - 1) / math.factorial(j - 1))
        increment = math.fsum(scalars)
        values[i] = math.fsum(scalars + [sigma[i] / fact_p * norm ** (p + 1)])
        taylor[i] = fx[i] + increment
        vectors.append(sigma[i] * (p + 1) / fact_p * reg_scale * s)
        grads[i] = _vector_sum(vectors)
    return ModelEval(values=values, gradients=grads, taylor=taylor)


def kkt_residual(evaluation, lam):
    """``||sum_i lam_i grad_s m_i(x, s)||``."""
    lam = np.asarray(lam, dtype=float)
    return float(np.linalg.norm(evaluation.gradients.T @ lam))
