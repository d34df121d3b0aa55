import numpy as np
import pytest

from paretohop.errors import CapabilityError, InputError
from paretohop.model import kkt_residual, model_eval
from paretohop.problems import builtin_problem


def identity_quad():
    return builtin_problem("quad2", A=[np.eye(2), np.eye(2)], a=[np.zeros(2), np.ones(2)]).oracle


class TestModelEval:
    def test_zero_step(self, rng):
        o = builtin_problem("fonseca", n=3).oracle
        x = rng.standard_normal(3)
        for p in (1, 2, 3):
            ev = model_eval(o, x, np.zeros(3), [1.0, 2.0], p)
            np.testing.assert_array_equal(ev.values, 0.0)
            np.testing.assert_allclose(ev.gradients, o.gradients(x), atol=1e-15)

    def test_p1_hand_value(self):
        ev = model_eval(identity_quad(), [1.0, 0.0], [-1.0, 0.0], [1.0, 1.0], 1)
        assert ev.values[0] == pytest.approx(0.0)

    def test_p2_hand_value(self):
        ev = model_eval(identity_quad(), [1.0, 0.0], [-1.0, 0.0], [2.0, 2.0], 2)
        assert ev.values[0] == pytest.approx(0.5)
        np.testing.assert_allclose(ev.gradients[0], [-3.0, 0.0])

    def test_taylor_exact_for_quadratics(self, rng):
        o = builtin_problem("quad2", n=3).oracle
        x, s = rng.standard_normal(3), rng.standard_normal(3)
        ev = model_eval(o, x, s, 1.0, 2)
        np.testing.assert_allclose(ev.taylor, o.eval(x + s), rtol=1e-12)

    def test_first_order_problem(self, rng):
        # sigma = 1/2 and p = 1 gives g_i^T s + 1/2 ||s||^2.
        o = builtin_problem("jos1").oracle
        x, s = rng.standard_normal(2), rng.standard_normal(2)
        ev = model_eval(o, x, s, 0.5, 1)
        np.testing.assert_allclose(ev.values, o.gradients(x) @ s + 0.5 * s @ s, rtol=1e-14)

    def test_errors(self):
        o = identity_quad()
        with pytest.raises(CapabilityError):
            model_eval(o, np.zeros(2), np.zeros(2), 1.0, 4)
        with pytest.raises(InputError):
            model_eval(o, np.zeros(2), np.zeros(2), [1.0, -1.0], 1)

    def test_objective_permutation(self, rng):
        o = builtin_problem("cubic2").oracle
        swapped = builtin_problem("cubic2", kappa=(0.5, 0.3), a=[np.ones(2), np.zeros(2)]).oracle
        x, s = rng.standard_normal(2), rng.standard_normal(2)
        a = model_eval(o, x, s, [1.0, 3.0], 3)
        b = model_eval(swapped, x, s, [3.0, 1.0], 3)
        assert a.max_value == pytest.approx(b.max_value, rel=1e-14)
        np.testing.assert_allclose(a.values, b.values[::-1], rtol=1e-14)


class TestGradients:
    @pytest.mark.parametrize("name", ["quad2", "jos1", "fonseca", "cubic2"])
    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_central_differences(self, name, p, rng):
        o = builtin_problem(name, n=3).oracle
        h = 1e-6
        for _ in range(10):
            x, s = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
            sigma = rng.uniform(0.1, 5, 2)
            ev = model_eval(o, x, s, sigma, p, fx=np.zeros(2))
            fd = np.empty((2, 3))
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                fd[:, k] = (model_eval(o, x, s + e, sigma, p, fx=np.zeros(2)).values
                            - model_eval(o, x, s - e, sigma, p, fx=np.zeros(2)).values) / (2 * h)
            np.testing.assert_allclose(ev.gradients, fd, rtol=1e-6, atol=1e-7)

    def test_kkt_residual_zero_gradient_objective(self):
        o = builtin_problem("jos1").oracle
        ev = model_eval(o, np.zeros(2), np.zeros(2), 1.0, 2)
        assert kkt_residual(ev, [1.0, 0.0]) == 0.0

    def test_kkt_residual_directional(self, rng):
        o = builtin_problem("quad2").oracle
        x, s, d = rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal(2)
        lam = np.array([0.5, 0.5])
        h = 1e-6

        def phi(t):
            return lam @ model_eval(o, x, s + t * d, 1.5, 2, fx=np.zeros(2)).values

        ev = model_eval(o, x, s, 1.5, 2, fx=np.zeros(2))
        directional = (phi(h) - phi(-h)) / (2 * h)
        assert (ev.gradients.T @ lam) @ d == pytest.approx(directional, rel=1e-6, abs=1e-8)
        assert kkt_residual(ev, lam) == pytest.approx(np.linalg.norm(ev.gradients.T @ lam))
