import numpy as np
import pytest

from fiocalc import compose, corpus, exprlang as ex
from fiocalc import phase as ph
from fiocalc import symbol as sy
from fiocalc.bumps import Bump
from fiocalc.errors import LayoutError


@pytest.fixture(scope="module")
def pseudo_plan():
    plan = corpus.pseudodiff_pair()
    compose.intersection_excess(plan, n_random=3)
    return plan


@pytest.fixture(scope="module")
def pushpull_plan():
    plan = corpus.pushforward_pullback_pair()
    compose.intersection_excess(plan, n_random=3)
    return plan


@pytest.fixture(scope="module")
def dummy_plan():
    plan = corpus.dummy_frequency_pair()
    compose.intersection_excess(plan, n_random=3)
    return plan


def test_composed_phase_expression(pseudo_plan):
    env = {"x1": 0.3, "y1": 0.1, "z1": -0.2, "theta1": 1.0, "sigma1": 1.5}
    got = complex(ex.evaluate(pseudo_plan.phi.expr, env))
    want = (0.3 - 0.1) * 1.0 + (0.1 + 0.2) * 1.5
    assert got == pytest.approx(want)


def test_composed_phase_homogeneous_and_validated(pseudo_plan):
    assert pseudo_plan.validation.passed
    assert pseudo_plan.validation.max_euler_rel <= 1e-10


def test_composed_imaginary_part_inherited():
    k1 = corpus.pseudodiff_kernel("y", "x", "theta")
    lay = ex.VarLayout.make(x=1, y=1, theta=1)
    patch = k1.phase.patch
    damped = compose.OperatorKernel(
        ph.PhaseFunction(ex.parse("(x1-y1)*theta1 + i*norm(theta)*(x1-y1)^2/2"),
                         lay, patch),
        sy.Amplitude(ex.num(corpus.INV_2PI), 0.0))
    k2 = corpus.pseudodiff_kernel("z", "y", "sigma")
    plan = compose.build_composed_phase(damped, k2)
    assert plan.validation.min_im >= -1e-12


def test_dimension_mismatch_raises():
    k1 = corpus.pseudodiff_kernel("y", "x", "theta")
    plan2 = corpus.pushforward_pullback_pair()
    with pytest.raises(LayoutError):
        compose.build_composed_phase(k1, plan2.k2)  # y sizes 1 vs 2


def test_excess_pseudodiff_zero(pseudo_plan):
    cls = pseudo_plan.classification
    assert cls.excess == 0
    assert cls.kind == "non-degenerate"
    assert len(set(cls.ranks)) == 1


def test_excess_pushforward_pullback_one(pushpull_plan):
    cls = pushpull_plan.classification
    assert cls.excess == 1
    assert cls.kind == "clean"
    assert "y2" in cls.omega_dprime


def test_excess_dummy_frequency_one(dummy_plan):
    cls = dummy_plan.classification
    assert cls.excess == 1
    assert "sigma2" in cls.omega_dprime


def test_excess_stable_across_random_samples():
    plan = corpus.pseudodiff_pair()
    cls = compose.intersection_excess(plan, n_random=10)
    assert len(set(cls.ranks)) == 1
    plan_b = corpus.pushforward_pullback_pair()
    cls_b = compose.intersection_excess(plan_b, n_random=10)
    assert len(set(cls_b.ranks)) == 1 and cls_b.excess == 1


def test_tangent_dimension_consistency(pseudo_plan, pushpull_plan):
    for plan in (pseudo_plan, pushpull_plan):
        cls = plan.classification
        cp = plan.stationary_points[0]
        D = ph.differential_matrix(plan.phi, cp.real_point())
        s = np.linalg.svd(D, compute_uv=False)
        rank = int(np.count_nonzero(s >= 1e-8 * s[0]))
        kernel_dim = len(plan.phi.var_names) - rank
        assert kernel_dim == plan.n + cls.excess


def test_composed_order_arithmetic():
    assert compose.composed_order(0.0, 0.0, 0) == 0.0
    assert compose.composed_order(0.0, 0.0, 1) == 0.5
    assert compose.composed_order(-0.5, 0.25, 2) == 0.75


def test_orders_of_corpus_kernels(pseudo_plan, pushpull_plan, dummy_plan):
    assert (pseudo_plan.m1, pseudo_plan.m2) == (0.0, 0.0)
    assert pushpull_plan.m1 == pytest.approx(-0.25)
    assert pushpull_plan.m2 == pytest.approx(-0.25)
    assert dummy_plan.m2 == pytest.approx(0.5)
    assert compose.composed_order(
        pushpull_plan.m1, pushpull_plan.m2,
        pushpull_plan.classification.excess) == pytest.approx(0.0)
    assert compose.composed_order(
        dummy_plan.m1, dummy_plan.m2,
        dummy_plan.classification.excess) == pytest.approx(1.0)


def test_transverse_symbol_two_code_paths(pseudo_plan):
    cp = pseudo_plan.stationary_points[0]
    cls = pseudo_plan.classification
    psi = sy.make_psi(pseudo_plan.phi, cp, classification=cls)
    direct = sy.principal_symbol(pseudo_plan.phi, pseudo_plan.amplitude,
                                 cls, cp, psi)
    via_fiber = sy.principal_symbol(pseudo_plan.phi, pseudo_plan.amplitude,
                                    cls, cp, psi, force_fiber_path=True)
    assert abs(direct.value - via_fiber.value) <= 1e-10 * abs(direct.value)
    # and the plan-level wrapper agrees with the direct formula
    wrapped = compose.composed_symbol(pseudo_plan, cp)
    assert abs(wrapped.value - direct.value) <= 1e-10 * abs(direct.value)


def test_composed_symbol_zero_amplitude(pseudo_plan):
    cp = pseudo_plan.stationary_points[0]
    cls = pseudo_plan.classification
    psi = sy.make_psi(pseudo_plan.phi, cp, classification=cls)
    zero = sy.Amplitude(ex.parse("0"), pseudo_plan.amplitude.degree)
    val = sy.principal_symbol(pseudo_plan.phi, zero, cls, cp, psi,
                              validate=False)
    assert val.value == 0


def test_chi_ratio_two_to_one():
    plan_a = corpus.pushforward_pullback_pair(chi_width=0.6)
    plan_b = corpus.pushforward_pullback_pair(chi_width=0.3)
    va = compose.composed_symbol(
        plan_a, compose.intersection_excess(plan_a) and plan_a.stationary_points[0],
        fiber_box={"y2": (-0.75, 0.75)})
    vb = compose.composed_symbol(
        plan_b, compose.intersection_excess(plan_b) and plan_b.stationary_points[0],
        fiber_box={"y2": (-0.75, 0.75)})
    assert abs(va.value / vb.value - 2.0) <= 1e-6


def test_dummy_symbol_fiber_integral(dummy_plan):
    cp = dummy_plan.stationary_points[0]
    val = compose.composed_symbol(dummy_plan, cp,
                                  fiber_box={"sigma2": (-0.75, 0.75)})
    # integrand = const bump(sigma2/sigma1); the fiber integral is
    # sigma1 * int bump relative to the zero-excess factor
    assert val.provenance["excess"] == 1
    assert abs(val.value) > 0


def test_kernel_mollification_identity(pseudo_plan):
    f = Bump(center=(0.0,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    g = Bump(center=(0.05,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    res = compose.compose_kernels_oracle(pseudo_plan, f, g, R=200.0,
                                         bandwidth=100.0)
    x, w = np.polynomial.legendre.leggauss(400)
    xs = 0.45 * x
    want = 0.45 * float(np.sum(w * f.values(xs[:, None]) * g.values(xs[:, None])))
    assert abs(res.value - want) / abs(want) <= 1e-3


def test_kernel_mollification_converges_in_R(pseudo_plan):
    f = Bump(center=(0.0,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    g = Bump(center=(0.05,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    errs = []
    x, w = np.polynomial.legendre.leggauss(400)
    xs = 0.45 * x
    want = 0.45 * float(np.sum(w * f.values(xs[:, None]) * g.values(xs[:, None])))
    for R in (50.0, 100.0, 200.0):
        res = compose.compose_kernels_oracle(pseudo_plan, f, g, R=R,
                                             bandwidth=100.0)
        errs.append(abs(res.value - want) / abs(want))
    assert errs[-1] <= 1e-3
    assert errs[-1] <= errs[0]


def test_pushpull_mollified_composition_value(pushpull_plan):
    # composition acts as (int chi) times the identity
    f = Bump(center=(0.0,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    g = Bump(center=(0.05,), r_in=0.15, r_out=0.4, profile="gauss", scale=0.12)
    res = compose.compose_kernels_oracle(pushpull_plan, f, g, R=200.0,
                                         bandwidth=100.0)
    x, w = np.polynomial.legendre.leggauss(400)
    xs = 0.45 * x
    fg = 0.45 * float(np.sum(w * f.values(xs[:, None]) * g.values(xs[:, None])))
    chi_int = 0.6 * corpus.profile_integral() * corpus.INV_2PI * 2 * np.pi
    # one 2pi is absorbed by each delta factor; chi rides along unchanged
    want = fg * 0.6 * corpus.profile_integral()
    assert abs(res.value - want) / abs(want) <= 2e-3


def test_zero_amplitude_oracle(pseudo_plan):
    zero = compose.OperatorKernel(
        pseudo_plan.k1.phase,
        sy.Amplitude(ex.parse("0"), 0.0),
        compose.DifferencePattern(row="x1", col="y1", freq="theta1",
                                  freq_amp=ex.parse("0")))
    plan = compose.build_composed_phase(zero, pseudo_plan.k2)
    f = Bump(center=(0.0,), r_in=0.15, r_out=0.4)
    res = compose.compose_kernels_oracle(plan, f, f, R=100.0, bandwidth=50.0,
                                         stability_tol=np.inf)
    assert res.value == 0


def test_pattern_verification_rejects_mismatch():
    k1 = corpus.pseudodiff_kernel("y", "x", "theta")
    bad = compose.OperatorKernel(
        k1.phase, k1.amplitude,
        compose.DifferencePattern(row="x1", col="y1", freq="theta1",
                                  freq_amp=None))  # claims amplitude 1
    from fiocalc.errors import DomainError
    with pytest.raises(DomainError):
        bad.verify_pattern()


@pytest.mark.slow
def test_pairing_decay_orders():
    t_grid = (30.0, 56.0, 100.0, 178.0, 316.0)
    for maker, want_m in ((corpus.pseudodiff_pair, 0.0),
                          (corpus.pushforward_pullback_pair, 0.0),
                          (corpus.dummy_frequency_pair, 1.0)):
        plan = maker()
        cls = compose.intersection_excess(plan)
        cp = plan.stationary_points[0]
        rep = compose.pairing_decay(plan, cp, t_grid)
        assert abs(rep.fit.slope - rep.predicted_slope) <= 0.15
        fitted_order = rep.fit.slope + plan.n / 4
        assert abs(fitted_order - want_m) <= 0.15
