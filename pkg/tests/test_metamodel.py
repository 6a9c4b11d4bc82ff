from __future__ import annotations

import numpy as np
import pytest

from gsa import metamodel as M
from gsa import models, sampling
from gsa.distributions import InputSpace, Uniform
from gsa.errors import CollinearityError, ParameterError, SchemaError

SP = InputSpace.from_pairs([("a", Uniform(0, 2)), ("b", Uniform(-1, 3)), ("c", Uniform(10, 11))])


def quad(x):
    a, b, c = x.T
    return 1 + 2 * a - b**2 + 0.5 * a * c + 3 * c


def test_exact_recovery_of_quadratic():
    s = sampling.lhs(SP, 60, 0)
    mm = M.fit_polynomial(s, quad(s.values), degree=2, interactions=True)
    assert mm.r_squared == pytest.approx(1.0, abs=1e-12)
    assert mm.loo_q2 == pytest.approx(1.0, abs=1e-10)
    fresh = sampling.monte_carlo(SP, 100, 9).values
    np.testing.assert_allclose(mm.predict(fresh), quad(fresh), rtol=1e-9)


def test_loo_refit_equals_hat_matrix():
    s = sampling.lhs(SP, 40, 1)
    y = quad(s.values) + np.random.default_rng(0).normal(size=40)
    a = M.loo_predictions(s, y, 2, True, refit=True)
    b = M.loo_predictions(s, y, 2, True, refit=False)
    np.testing.assert_allclose(a, b, rtol=1e-8)


def test_linear_coefficients_in_physical_units():
    s = sampling.lhs(SP, 30, 2)
    y = s.values @ np.array([1.5, -2.0, 4.0]) + 7.0
    b0, beta = M.fit_polynomial(s, y).linear_coefficients()
    assert b0 == pytest.approx(7.0, abs=1e-8)
    np.testing.assert_allclose(beta, [1.5, -2.0, 4.0], rtol=1e-10)


def test_text_round_trip(tmp_path):
    s = sampling.lhs(SP, 50, 3)
    mm = M.fit_polynomial(s, np.sin(s.values[:, 0]) + s.values[:, 1], degree=3, interactions=True, output="z")
    mm.save(tmp_path / "m.txt")
    back = M.Metamodel.load(tmp_path / "m.txt")
    x = sampling.monte_carlo(SP, 20, 0).values
    np.testing.assert_array_equal(back.predict(x), mm.predict(x))
    assert back.output == "z" and back.terms == mm.terms and back.loo_q2 == mm.loo_q2
    with pytest.raises(SchemaError):
        M.Metamodel.from_text("not a model")


def test_underdetermined_and_collinear():
    s = sampling.lhs(SP, 9, 0)
    with pytest.raises(ParameterError):
        M.fit_polynomial(s, quad(s.values), degree=2, interactions=True)
    x = np.column_stack([s.values[:, 0], 2 * s.values[:, 0]])
    with pytest.raises(CollinearityError):
        M.fit_polynomial(x, s.values[:, 1], names=["p", "q"])


def test_sobol_through_exact_linear_metamodel():
    s = sampling.lhs(SP, 30, 4)
    y = s.values @ np.array([1.0, 1.0, 4.0])
    mm = M.fit_polynomial(s, y)
    res = M.sobol_via_metamodel(mm, SP, 5000, 0, n_boot=50)
    var = np.array([1.0 * 4 / 12, 16 / 12, 16 / 12])
    truth = var / var.sum()
    np.testing.assert_allclose(res.result.total, truth, atol=0.03)
    assert res.unexplained == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(SchemaError):
        M.sobol_via_metamodel(mm, SP.subset(["a", "b"]), 100, 0)


def test_as_model_is_evaluable():
    s = sampling.lhs(SP, 30, 5)
    mm = M.fit_polynomial(s, quad(s.values), degree=2, interactions=True, output="q")
    ev = models.evaluate(mm.as_model(), s)
    np.testing.assert_allclose(ev["q"], quad(s.values), rtol=1e-9)
