import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from paretohop.dualdir import common_descent_direction, project_simplex, stationarity_measure
from paretohop.errors import InputError
from paretohop.problems import builtin_problem

from conftest import random_simplex

gradient_matrices = st.integers(1, 3).flatmap(
    lambda m: st.integers(1, 5).flatmap(
        lambda n: arrays(np.float64, (m, n), elements=st.floats(-10, 10, allow_subnormal=False))
    )
)


def grid_min_norm_2(g1, g2, steps=200001):
    # Independent oracle: brute-force grid over lambda in [0, 1].
    t = np.linspace(0.0, 1.0, steps)[:, None]
    w = t * g1 + (1 - t) * g2
    return np.min(np.linalg.norm(w, axis=1))


class TestExamples:
    def test_single_objective(self):
        d = common_descent_direction([[2.0, 0.0]])
        np.testing.assert_array_equal(d.v, [-2.0, 0.0])
        np.testing.assert_array_equal(d.lam, [1.0])

    def test_opposing_gradients(self):
        d = common_descent_direction([[1.0, 0.0], [-1.0, 0.0]])
        np.testing.assert_allclose(d.v, 0.0, atol=1e-15)
        np.testing.assert_allclose(d.lam, [0.5, 0.5])

    def test_orthogonal_gradients(self):
        d = common_descent_direction([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(d.lam, [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(d.v, [-0.5, -0.5], atol=1e-12)
        assert d.norm == pytest.approx(grid_min_norm_2(np.array([1.0, 0]), np.array([0, 1.0])), abs=1e-9)

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            common_descent_direction([[np.nan, 0.0]])

    @pytest.mark.parametrize("method", ["active_set", "projected_gradient"])
    def test_methods_agree(self, method, rng):
        for _ in range(50):
            G = rng.standard_normal((3, 4))
            ref = common_descent_direction(G, method="active_set")
            d = common_descent_direction(G, method=method)
            np.testing.assert_allclose(d.v, ref.v, atol=1e-7)


class TestStationarity:
    def test_quad2_common_minimiser(self):
        o = builtin_problem("quad2", A=[np.eye(2), 2 * np.eye(2)], a=[np.zeros(2), np.zeros(2)]).oracle
        assert stationarity_measure(o, np.zeros(2)) == 0.0

    def test_jos1_midpoint(self):
        o = builtin_problem("jos1").oracle
        assert stationarity_measure(o, np.array([1.0, 1.0])) <= 1e-14

    def test_jos1_at_one_minimiser(self):
        o = builtin_problem("jos1").oracle
        assert stationarity_measure(o, np.zeros(2)) == 0.0

    def test_jos1_far_point(self):
        o = builtin_problem("jos1").oracle
        # gradients (3,3) and (1,1): minimum-norm hull point is (1,1).
        assert stationarity_measure(o, np.array([3.0, 3.0])) == pytest.approx(np.sqrt(2.0))


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(gradient_matrices, st.integers(0, 2**32 - 1))
    def test_dual_bound(self, G, seed):
        d = common_descent_direction(G)
        U = random_simplex(np.random.default_rng(seed), G.shape[0], size=200)
        assert d.norm <= np.linalg.norm(U @ G, axis=1).min() + 1e-8

    @settings(max_examples=200, deadline=None)
    @given(gradient_matrices)
    def test_simplex_and_consistency(self, G):
        d = common_descent_direction(G)
        assert np.all(d.lam >= 0) and abs(d.lam.sum() - 1) <= 1e-12
        np.testing.assert_allclose(d.v, -G.T @ d.lam, atol=1e-12)
        assert d.dual_value <= 0
        assert np.max(G @ d.v) + 0.5 * d.v @ d.v <= 1e-10 * max(1.0, np.abs(G).max() ** 2)

    @settings(max_examples=100, deadline=None)
    @given(gradient_matrices, st.floats(0.01, 100))
    def test_scale_consistency(self, G, t):
        a = common_descent_direction(G).v
        b = common_descent_direction(t * G).v
        np.testing.assert_allclose(b, t * a, rtol=1e-8, atol=1e-8 * max(1.0, t * np.abs(G).max()))

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, (1, 4), elements=st.floats(-10, 10)))
    def test_single_row_is_negative_gradient(self, G):
        np.testing.assert_array_equal(common_descent_direction(G).v, -G[0])

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-5, 5)))
    def test_projection_on_simplex(self, c):
        p = project_simplex(c)
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0)
