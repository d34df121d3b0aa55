"""Shared test oracles and helpers."""

import numpy as np
import pytest

from paretohop.problems import ObjectiveOracle


class HalfSquare(ObjectiveOracle):
    """Single objective f(x) = ||x||^2 / 2 (L_1 = 1)."""

    def __init__(self, n=1):
        super().__init__(n, 1, 3, lipschitz={1: [1.0], 2: [0.0]}, f_min=[0.0])

    def _values(self, x):
        return np.array([0.5 * x @ x])

    def _gradient(self, x, i):
        return x.copy()

    def _contract(self, x, i, j, s):
        if j == 2:
            return float(s @ s), s.copy()
        return 0.0, np.zeros(self.n)


class LinearRows(ObjectiveOracle):
    """F(x) = G x; used to feed fixed gradient matrices to the subsolvers."""

    def __init__(self, G):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        super().__init__(G.shape[1], G.shape[0], 3)
        self.G = G

    def _values(self, x):
        return self.G @ x

    def _gradient(self, x, i):
        return self.G[i].copy()

    def _contract(self, x, i, j, s):
        return 0.0, np.zeros(self.n)


def random_simplex(rng, m, size=None):
    return rng.dirichlet(np.ones(m), size=size)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
