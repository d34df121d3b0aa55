import math

import numpy as np
import pytest
from dataclasses import replace

from paretohop.dualdir import common_descent_direction
from paretohop.errors import InputError
from paretohop.problems import builtin_problem
from paretohop.subsolver import SolverOptions, solve_exact_p1, solve_inexact, verify_certificate

from conftest import LinearRows

GRID = np.arange(-300, 301) / 100.0
S1, S2 = np.meshgrid(GRID, GRID, indexing="ij")
S = np.stack([S1.ravel(), S2.ravel()], axis=1)
NORM = np.linalg.norm(S, axis=1)


def grid_min_p1(G, sigma):
    vals = S @ G.T + sigma[None, :] * NORM[:, None] ** 2
    return vals.max(axis=1).min()


def grid_min_quad_p2(oracle, x, sigma):
    # Model of f_i = 1/2 (x-a)^T A (x-a), written out independently of model_eval.
    cols = []
    for i, (A, a) in enumerate(zip(oracle.A, oracle.a)):
        g = A @ (x - a)
        cols.append(S @ g + 0.5 * np.einsum("ij,jk,ik->i", S, A, S) + sigma[i] / 2 * NORM**3)
    return np.max(np.stack(cols, axis=1), axis=1).min()


class TestExactP1:
    def test_single_objective(self):
        c = solve_exact_p1([[2.0, 0.0]], 1.0)
        np.testing.assert_allclose(c.s, [-1.0, 0.0])
        assert c.model_max_value == pytest.approx(-1.0)

    def test_stationary(self):
        c = solve_exact_p1([[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
        np.testing.assert_allclose(c.s, 0.0, atol=1e-15)

    def test_orthogonal(self):
        c = solve_exact_p1([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
        np.testing.assert_allclose(c.s, [-0.25, -0.25], atol=1e-12)
        assert c.model_max_value == pytest.approx(-0.125)

    def test_zero_gradients(self):
        c = solve_exact_p1(np.zeros((3, 2)), [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(c.s, 0.0)
        np.testing.assert_array_equal(c.lam, [1.0, 0.0, 0.0])

    def test_bad_sigma(self):
        with pytest.raises(InputError):
            solve_exact_p1([[1.0, 0.0]], 0.0)

    def test_certificates_and_grid(self, rng):
        for _ in range(40):
            m = rng.integers(1, 4)
            G = rng.standard_normal((m, 2))
            sigma = rng.uniform(0.5, 3.0, m)
            c = solve_exact_p1(G, sigma)
            assert verify_certificate(LinearRows(G), np.zeros(2), c)
            assert c.model_max_value <= grid_min_p1(G, sigma) + 1e-12

    def test_step_norm_monotone_in_sigma(self, rng):
        for _ in range(20):
            G = rng.standard_normal((3, 4))
            norms = [solve_exact_p1(G, s).step_norm for s in (0.5, 1.0, 2.0, 4.0, 8.0)]
            assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_stationarity_bound(self, rng):
        # ||v(x+s)|| <= (2 max sigma + L) ||s|| for exact first-order steps.
        o = builtin_problem("quad2", n=3).oracle
        L = o.lipschitz_constants(1).max()
        for _ in range(50):
            x = rng.uniform(-3, 3, 3)
            sigma = rng.uniform(0.5, 4, 2)
            c = solve_exact_p1(o.gradients(x), sigma)
            v = common_descent_direction(o.gradients(x + c.s)).norm
            assert v <= (2 * sigma.max() + L) * c.step_norm + 1e-6


class TestInexact:
    def test_quad2_p2_against_grid(self, rng):
        o = builtin_problem("quad2").oracle
        for _ in range(5):
            x = rng.uniform(-2, 3, 2)
            sigma = rng.uniform(0.5, 3, 2)
            c = solve_inexact(o, x, sigma, 2)
            assert verify_certificate(o, x, c)
            assert c.model_max_value <= grid_min_quad_p2(o, x, sigma) + 1e-4

    def test_zero_gradient_point(self):
        o = builtin_problem("jos1").oracle
        c = solve_inexact(o, np.zeros(2), [1.0, 1.0], 2)
        np.testing.assert_array_equal(c.s, 0.0)
        assert verify_certificate(o, np.zeros(2), c)

    def test_jos1_recheck(self):
        o = builtin_problem("jos1").oracle
        x = np.array([1.0, 1.0])
        c = solve_inexact(o, x, [1.0, 1.0], 2)
        assert verify_certificate(o, x, c)

    def test_exact_parity_tau_zero(self, rng):
        o = builtin_problem("quad2").oracle
        for _ in range(5):
            x = rng.uniform(-2, 3, 2)
            c = solve_inexact(o, x, [1.0, 2.0], 1, tau=0.0, delta_bar=1 + 1e-12)
            e = solve_exact_p1(o.gradients(x), [1.0, 2.0])
            assert verify_certificate(o, x, c)
            assert c.model_max_value == pytest.approx(e.model_max_value, rel=1e-6, abs=1e-10)

    def test_stationarity_bound_inexact(self, rng):
        o = builtin_problem("cubic2").oracle
        L = o.lipschitz_constants(2).max()
        tau, dbar = 1e-2, 2.0
        for _ in range(10):
            x = rng.uniform(-1, 2, 2)
            sigma = rng.uniform(0.5, 2, 2)
            c = solve_inexact(o, x, sigma, 2, tau=tau, delta_bar=dbar)
            v = common_descent_direction(o.gradients(x + c.s)).norm
            assert v <= (tau + dbar * (3 * sigma.max() / 2 + L)) * c.step_norm**2 + 1e-6


class TestVerifyCertificate:
    def test_scaled_multipliers_rejected(self):
        o = builtin_problem("quad2").oracle
        x = np.array([2.0, -1.0])
        c = solve_inexact(o, x, [1.0, 1.0], 2)
        assert verify_certificate(o, x, c)
        assert not verify_certificate(o, x, replace(c, lam=c.lam * 2 * c.delta_bar))

    def test_exact_multipliers_scaled_rejected(self, rng):
        G = rng.standard_normal((2, 2))
        c = solve_exact_p1(G, [1.0, 1.0])
        assert not verify_certificate(LinearRows(G), np.zeros(2), replace(c, lam=2 * c.lam))

    def test_negative_multipliers_rejected(self):
        o = builtin_problem("quad2").oracle
        x = np.array([2.0, -1.0])
        c = solve_inexact(o, x, [1.0, 1.0], 2)
        assert not verify_certificate(o, x, replace(c, lam=np.array([1.5, -0.5])))

    def test_perturbed_steps_rejected(self, rng):
        o = builtin_problem("quad2").oracle
        x = np.array([2.0, -1.0])
        c = solve_inexact(o, x, [1.0, 1.0], 2)
        size = 10 * c.tau * c.step_norm**2
        rejected = 0
        for _ in range(100):
            noise = rng.standard_normal(2)
            s = c.s + size * noise / np.linalg.norm(noise)
            rejected += not verify_certificate(o, x, replace(c, s=s))
        assert rejected >= 95

    def test_wrong_shapes(self):
        o = builtin_problem("quad2").oracle
        c = solve_exact_p1(np.eye(2), [1.0, 1.0])
        assert not verify_certificate(o, np.zeros(2), replace(c, lam=np.ones(3) / 3))


def test_options_validation():
    with pytest.raises(InputError):
        SolverOptions(tau=-1.0)
    with pytest.raises(InputError):
        SolverOptions(delta_bar=0.5)
