import numpy as np
import pytest

from fiocalc import exprlang as ex
from fiocalc import oracle
from fiocalc.bumps import Bump
from fiocalc.errors import BudgetError, ConvergenceError


def test_gauss_exact_on_polynomials():
    rng = np.random.default_rng(1)
    for q in (3, 8, 17):
        x, w = oracle.gauss_legendre(q)
        for _ in range(5):
            coeffs = rng.uniform(-1, 1, size=2 * q)  # degree 2q-1
            quad = float(np.sum(w * np.polyval(coeffs, x)))
            anti = np.polyint(coeffs)
            exact = float(np.polyval(anti, 1.0) - np.polyval(anti, -1.0))
            assert quad == pytest.approx(exact, abs=1e-13)


def test_panel_rule_covers_interval():
    x, w = oracle.panel_rule(-2.0, 3.0, 5000)
    assert np.sum(w) == pytest.approx(5.0, rel=1e-13)
    assert x.min() > -2.0 and x.max() < 3.0


def test_oscillation_resolution_t1000():
    lay = ex.VarLayout.make(x=1)
    spec = oracle.QuadratureSpec(box=((0.0, 1.0),), damping_shrink=False)
    t = 1e3
    got = oracle.osc_integral(ex.parse("x1"), None, t, spec, layout=lay)
    want = (np.exp(1j * t) - 1.0) / (1j * t)
    assert abs(got - want) <= 1e-12


def test_gaussian_identity_with_wide_bump():
    lay = ex.VarLayout.make(x=1)
    u = Bump(center=(0.0,), r_in=5.0, r_out=8.0)
    spec = oracle.QuadratureSpec(box=((-8.5, 8.5),))
    t = 100.0
    got = oracle.osc_integral(ex.parse("i*x1^2/2"), u, t, spec, layout=lay)
    want = np.sqrt(2 * np.pi / t)
    assert abs(got - want) / want <= 1e-10


def test_damping_shrink_reduces_box():
    lay = ex.VarLayout.make(x=1)
    spec = oracle.QuadratureSpec(box=((-8.5, 8.5),))
    rep = oracle.osc_integral_report(ex.parse("i*x1^2/2"), None, 100.0, spec,
                                     layout=lay)
    assert rep.box[0][1] < 2.0


def test_zero_amplitude():
    lay = ex.VarLayout.make(x=1)
    spec = oracle.QuadratureSpec(box=((-1.0, 1.0),))
    got = oracle.osc_integral(ex.parse("x1"), ex.parse("0"), 10.0, spec,
                              layout=lay)
    assert got == 0.0


def test_budget_error_when_capped():
    lay = ex.VarLayout.make(x=1)
    spec = oracle.QuadratureSpec(box=((0.0, 1.0),), max_nodes_axis=40,
                                 damping_shrink=False)
    with pytest.raises(BudgetError):
        oracle.osc_integral(ex.parse("x1"), None, 1e4, spec, layout=lay)


def test_doubling_reported():
    lay = ex.VarLayout.make(x=1)
    spec = oracle.QuadratureSpec(box=((0.0, 1.0),), damping_shrink=False)
    rep = oracle.osc_integral_report(ex.parse("x1"), None, 100.0, spec,
                                     layout=lay)
    assert rep.last_delta <= max(1e-12 * abs(rep.value), 1e-15)
    assert rep.doublings >= 1


def test_2d_separable_oscillation():
    lay = ex.VarLayout.make(x=2)
    spec = oracle.QuadratureSpec(box=((0.0, 1.0), (0.0, 1.0)),
                                 damping_shrink=False)
    t = 50.0
    got = oracle.osc_integral(ex.parse("x1+x2"), None, t, spec, layout=lay)
    one = (np.exp(1j * t) - 1.0) / (1j * t)
    assert abs(got - one * one) <= 1e-12


def test_fit_order_exact_power():
    ts = [10.0, 31.6, 100.0, 316.0, 1000.0]
    fit = oracle.fit_order([(t, t ** -1.5) for t in ts])
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.residual <= 1e-12


def test_fit_order_intercept():
    ts = [10.0, 100.0, 1000.0, 10000.0]
    fit = oracle.fit_order([(t, 3.0 * t ** -2) for t in ts])
    assert fit.slope == pytest.approx(-2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)


def test_fit_order_drops_noise_floor():
    ts = [10.0, 31.6, 100.0, 316.0, 1000.0]
    samples = [(t, t ** -1.5) for t in ts[:-1]] + [(ts[-1], 1e-17)]
    fit = oracle.fit_order(samples)
    assert fit.dropped == (1000.0,)
    assert fit.n_used == 4


def test_fit_order_needs_four():
    with pytest.raises(ConvergenceError):
        oracle.fit_order([(10.0, 1.0), (100.0, 0.1), (1000.0, 0.01)])
