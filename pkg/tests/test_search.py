import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from paretohop.archive import EvaluatedPoint, Front, hypervolume, nondominated_filter
from paretohop.drivers import n_f_bound
from paretohop.errors import ConfigurationError, SearchError
from paretohop.problems import builtin_problem
from paretohop.search import RSParams, margin_candidate_test, regularized_search, trials_to_csv

from conftest import HalfSquare


def start(oracle, x):
    x = np.asarray(x, dtype=float)
    return EvaluatedPoint(x, oracle.eval(x))


class TestMarginTest:
    def test_examples(self):
        assert margin_candidate_test([0, 10], [[5, 5]], [1, 1])
        assert not margin_candidate_test([6, 6], [[5, 5]], [1, 1])
        assert margin_candidate_test([6, 6], [], [1, 1])

    @settings(max_examples=300, deadline=None)
    @given(
        arrays(np.float64, 3, elements=st.floats(-5, 5)),
        arrays(np.float64, (4, 3), elements=st.floats(-5, 5)),
        arrays(np.float64, 3, elements=st.floats(0, 2)),
    )
    def test_negated_greater_predicate(self, f, Y, nu):
        # "F(x+s) not > F(y) - nu" for all y, written out literally.
        expected = all(not np.all(f > y - nu) for y in Y)
        assert margin_candidate_test(f, Y, nu) == expected


class TestParams:
    @pytest.mark.parametrize("kw,field", [
        ({"eta": 1.5}, "eta"), ({"gamma": 0.0}, "gamma"), ({"sigma_l": 5.0}, "sigma_u"),
        ({"sigma_l": -1.0}, "sigma_l"), ({"j_max": 0}, "j_max"), ({"tau": -1}, "tau"),
        ({"delta_bar": 0.5}, "delta_bar"), ({"sigma_init": "x"}, "sigma_init"),
        ({"subsolver": "exact", "p": 2}, "subsolver"),
    ])
    def test_validation(self, kw, field):
        with pytest.raises(ConfigurationError) as err:
            RSParams(**kw)
        assert err.value.field == field

    def test_initial_sigma_rules(self):
        assert RSParams(sigma_init="midpoint").initial_sigma(2).tolist() == [2.5, 2.5]
        assert RSParams(sigma_init="warm").initial_sigma(2, [10.0, 2.0]).tolist() == [4.0, 2.0]
        assert RSParams().initial_sigma(2, [10.0, 2.0]).tolist() == [1.0, 1.0]


class TestHandExamples:
    def test_accepted_first_trial(self):
        o = HalfSquare()
        x = start(o, [1.0])
        out = regularized_search(o, x, Front([x]), RSParams(sigma_l=2.0, sigma_u=2.0))
        np.testing.assert_allclose(out.s, [-0.25])
        assert len(out.Y) == 1 and out.Y[0].fx[0] == pytest.approx(0.28125)
        assert out.f_evals == 1 and out.Y[0].origin == "rs_final(0)"

    def test_sigma_doubling(self):
        o = HalfSquare()
        x = start(o, [1.0])
        params = RSParams(sigma_l=0.125, sigma_u=0.125, gamma=0.5, eta=0.5)
        out = regularized_search(o, x, Front([x]), params)
        # s = -1/(2 sigma): sigma 0.125 -> x+s=-3, 0.25 -> -1, 0.5 -> 0 (accepted).
        assert [t.sigma[0] for t in out.trials] == [0.125, 0.25, 0.5]
        np.testing.assert_allclose([t.fx[0] for t in out.trials], [4.5, 0.5, 0.0])
        assert out.sigma[0] <= max(1.0 / (0.5 * 0.5), 0.125)
        assert out.f_evals == len(out.trials) == 3

    def test_trial_cap(self):
        o = HalfSquare()
        x = start(o, [1.0])
        with pytest.raises(SearchError) as err:
            regularized_search(o, x, Front([x]), RSParams(sigma_l=0.01, sigma_u=0.01, j_max=2))
        assert len(err.value.trials) == 2


def check_call(o, x, X, params, out):
    """Sufficient decrease, margin non-domination and sigma monotonicity."""
    p = params.p
    nu = params.eta * np.linalg.norm(out.s) ** (p + 1) / math.factorial(p) * out.sigma
    final = out.final
    assert np.all(final.fx <= x.fx - nu)
    for y in X:
        assert not np.all(final.fx > y.fx - nu)
    sig = np.array([t.sigma for t in out.trials])
    assert np.all(np.diff(sig, axis=0) >= 0)
    for a, b, t in zip(sig, sig[1:], out.trials):
        failing = t.fx > x.fx - params.eta * t.step_norm ** (p + 1) / math.factorial(p) * a
        np.testing.assert_array_equal(b > a, failing)
    assert out.f_evals == len(out.trials)


class TestContract:
    @pytest.mark.parametrize("name,p", [("quad2", 1), ("jos1", 1), ("jos1", 2), ("cubic2", 2)])
    def test_random_calls(self, name, p, rng):
        o = builtin_problem(name).oracle
        params = RSParams(p=p, sigma_l=0.05, sigma_u=0.2)
        L = o.lipschitz_constants(p)
        lo, hi = params.bounds(2)
        sigma_max = np.maximum(L / (params.gamma * (1 - params.eta)), hi)
        nF = n_f_bound(params.eta, params.gamma, lo, hi, L)
        for _ in range(6 if p == 2 else 20):
            X = nondominated_filter([start(o, rng.uniform(-1, 3, 2)) for _ in range(4)])
            x = X[0]
            out = regularized_search(o, x, X, params)
            check_call(o, x, X, params, out)
            assert np.all(out.sigma <= sigma_max)
            assert out.f_evals <= nF

    def test_candidates_increase_hypervolume(self, rng):
        o = builtin_problem("quad2").oracle
        params = RSParams(sigma_l=0.02, sigma_u=0.02)
        hits = 0
        for _ in range(30):
            X = list(nondominated_filter([start(o, rng.uniform(-1, 3, 2)) for _ in range(3)]))
            rho = np.max([y.fx for y in X], axis=0) + 1.0
            out = regularized_search(o, X[0], X, params)
            pool = list(X)
            for t, y in zip([t for t in out.trials if t.in_Y], out.Y):
                before = hypervolume(pool, rho)
                nu = params.eta * t.step_norm**2 * t.sigma.min()
                if np.all(y.fx + nu <= rho):
                    pool.append(y)
                    assert hypervolume(pool, rho) - before >= nu**2 - 1e-9
                    hits += 1
        assert hits > 0

    def test_trial_csv(self):
        o = HalfSquare()
        x = start(o, [1.0])
        out = regularized_search(o, x, Front([x]), RSParams(sigma_l=0.125, sigma_u=0.125))
        lines = trials_to_csv([(0, t) for t in out.trials], 1).splitlines()
        assert lines[0] == "k,j,sigma_0,step_norm,f_0,accepted"
        assert lines[1] == "0,0,0.125,4,4.5,0" and lines[-1].endswith(",1")
