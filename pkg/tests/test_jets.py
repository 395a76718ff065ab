import math

import numpy as np
import pytest

from fiocalc import exprlang as ex
from fiocalc import jets
from fiocalc.bumps import Bump


def test_indices_graded_lex_and_count():
    idx = jets.indices(2, 3)
    assert idx[0] == (0, 0)
    assert len(idx) == math.comb(3 + 2, 2)
    degs = [sum(a) for a in idx]
    assert degs == sorted(degs)


def test_square_at_one():
    lay = ex.VarLayout.make(x=1)
    j = jets.jet_of(ex.parse("x1^2"), lay, [1.0], ["x1"], 2)
    assert np.allclose(j.coeffs, [1.0, 2.0, 1.0])


def test_exp_series():
    lay = ex.VarLayout.make(x=1)
    j = jets.jet_of(ex.parse("exp(x1)"), lay, [0.0], ["x1"], 3)
    assert np.allclose(j.coeffs, [1.0, 1.0, 0.5, 1.0 / 6.0])


def test_frozen_variable():
    lay = ex.VarLayout.make(x=1, theta=1)
    j = jets.jet_of(ex.parse("x1*theta1"), lay, [0.0, 1.0], ["x1"], 1)
    assert np.allclose(j.coeffs, [0.0, 1.0])


def test_gradient_and_hessian():
    lay = ex.VarLayout.make(x=2)
    e = ex.parse("x1^2/2 + x1*x2")
    g = jets.gradient(e, lay, [1.0, 1.0])
    assert np.allclose(g, [2.0, 1.0])
    H = jets.hessian(e, lay, [0.3, -0.7])
    assert np.allclose(H, [[1.0, 1.0], [1.0, 0.0]])


def test_hessian_imaginary_quadratic():
    lay = ex.VarLayout.make(x=1)
    H = jets.hessian(ex.parse("i*x1^2/2"), lay, [0.0])
    assert np.allclose(H, [[1j]])


def test_hessian_exactly_symmetric():
    lay = ex.VarLayout.make(x=3)
    e = ex.parse("exp(x1*x2)*sin(x3) + x1^4*x3")
    H = jets.hessian(e, lay, [0.2, -0.4, 0.9])
    assert np.max(np.abs(H - H.T)) == 0.0


def _random_poly(rng, nvars, deg):
    terms = []
    for _ in range(6):
        alpha = rng.integers(0, deg + 1, size=nvars)
        while alpha.sum() > deg:
            alpha = rng.integers(0, deg + 1, size=nvars)
        c = rng.uniform(-2, 2)
        term = ex.num(c)
        for v in range(nvars):
            for _ in range(alpha[v]):
                term = ex.mul(term, ex.var(f"x{v+1}"))
        terms.append(term)
    e = terms[0]
    for t in terms[1:]:
        e = ex.add(e, t)
    return e


def test_jets_match_finite_differences_on_random_polys():
    rng = np.random.default_rng(3)
    for _ in range(50):
        nvars = int(rng.integers(1, 5))
        lay = ex.VarLayout.make(x=nvars)
        e = _random_poly(rng, nvars, 5)
        base = rng.uniform(-1, 1, size=nvars)
        names = lay.names()
        g = jets.gradient(e, lay, base)
        h = 1e-5 * max(1.0, float(np.max(np.abs(base))))
        for k in range(nvars):
            dp = base.copy()
            dm = base.copy()
            dp[k] += h
            dm[k] -= h
            fd = (ex.evaluate_at(e, lay, dp) - ex.evaluate_at(e, lay, dm)) / (2 * h)
            denom = max(1.0, abs(fd))
            assert abs(g[k] - fd) / denom <= 1e-6


def test_product_rule_exact_on_polynomials():
    lay = ex.VarLayout.make(x=2)
    f = ex.parse("x1^2 + x2")
    g = ex.parse("x1*x2 - 3")
    K = 4
    jf = jets.jet_of(f, lay, [0.5, -1.5], ["x1", "x2"], K)
    jg = jets.jet_of(g, lay, [0.5, -1.5], ["x1", "x2"], K)
    jfg = jets.jet_of(ex.mul(f, g), lay, [0.5, -1.5], ["x1", "x2"], K)
    assert np.allclose((jf * jg).coeffs, jfg.coeffs, rtol=0, atol=1e-14)


def test_constant_jet_shape():
    j = jets.Jet.constant(4.0, 3, 2)
    assert j.value == 4.0
    assert np.count_nonzero(j.coeffs) == 1


def test_division_and_log_sqrt():
    lay = ex.VarLayout.make(x=1)
    j = jets.jet_of(ex.parse("1/(1-x1)"), lay, [0.0], ["x1"], 4)
    assert np.allclose(j.coeffs, np.ones(5))
    j2 = jets.jet_of(ex.parse("log(1+x1)"), lay, [0.0], ["x1"], 4)
    assert np.allclose(j2.coeffs, [0, 1, -0.5, 1 / 3, -0.25])
    j3 = jets.jet_of(ex.parse("sqrt(1+x1)"), lay, [0.0], ["x1"], 3)
    assert np.allclose(j3.coeffs, [1, 0.5, -0.125, 0.0625])


def test_norm_jet_matches_manual():
    lay = ex.VarLayout.make(theta=2)
    j = jets.jet_of(ex.parse("norm(theta)"), lay, [3.0, 4.0],
                    ["theta1", "theta2"], 1)
    assert j.value == pytest.approx(5.0)
    g = jets.gradient(ex.parse("norm(theta)"), lay, [3.0, 4.0])
    assert np.allclose(g, [0.6, 0.8])


def test_integer_power_negative():
    lay = ex.VarLayout.make(x=1)
    j = jets.jet_of(ex.parse("x1^-2"), lay, [2.0], ["x1"], 2)
    # d/dx x^-2 = -2 x^-3, half the second derivative is 3 x^-4
    assert np.allclose(j.coeffs, [0.25, -0.25, 3.0 / 16])


def test_eval_shift_reproduces_polynomial():
    lay = ex.VarLayout.make(x=2)
    e = ex.parse("x1^3 - 2*x1*x2 + x2^2")
    j = jets.jet_of(e, lay, [0.4, -0.2], ["x1", "x2"], 3)
    delta = np.array([0.05 + 0.02j, -0.03 + 0.01j])
    direct = ex.evaluate(e, {"x1": 0.4 + delta[0], "x2": -0.2 + delta[1]})
    assert abs(j.eval_shift(delta) - direct) <= 1e-12


def test_bump_jet_regions():
    b = Bump(center=(0.0,), r_in=0.5, r_out=1.0)
    assert b.jet([0.1], 3).value == 1.0
    assert b.jet([2.0], 3).value == 0.0
    j = b.jet([0.75], 3)
    assert 0 < j.value.real < 1
    # finite differences on the transition region
    h = 1e-6
    fd = (b.value([0.75 + h]) - b.value([0.75 - h])) / (2 * h)
    pos = jets.index_positions(1, 3)[(1,)]
    assert abs(j.coeffs[pos] - fd) <= 1e-4 * abs(fd)
