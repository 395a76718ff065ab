import numpy as np
import pytest

from fiocalc import exprlang as ex
from fiocalc import phase as ph
from fiocalc.errors import RankError


def make_phase(src, theta=1, x=1, angle=0.2, radius=(0.5, 2.0),
               x_box=None, direction=None):
    lay = ex.VarLayout.make(x=x, theta=theta)
    patch = ph.ConicPatch(
        x_box=x_box or tuple([(-0.5, 0.5)] * x),
        theta_direction=direction or tuple([1.0] + [0.0] * (theta - 1)),
        theta_angle=angle,
        theta_radius=radius,
    )
    return ph.PhaseFunction(ex.parse(src), lay, patch)


LINEAR = "x1*theta1"
DAMPED = "x1*theta1 + i*norm(theta)*x1^2/2"
BAD = "x1*theta1 - i*norm(theta)*x1^2"


def test_validate_linear_phase():
    rep = ph.validate_phase(make_phase(LINEAR))
    assert rep.passed
    assert rep.min_im == 0.0
    assert rep.max_euler_rel <= 1e-10


def test_validate_damped_phase():
    rep = ph.validate_phase(make_phase(DAMPED))
    assert rep.passed
    assert rep.min_im >= 0.0


def test_validate_negative_imaginary_fails():
    rep = ph.validate_phase(make_phase(BAD))
    assert not rep.passed
    assert any("Im" in f for f in rep.failures)


def test_find_critical_linear():
    cp = ph.find_critical(make_phase(LINEAR), x_seed=[0.3])
    assert cp.residual <= 1e-12
    assert cp.is_real
    assert abs(cp.point[0]) <= 1e-12


def test_find_critical_complex_root():
    cp = ph.find_critical(make_phase("x1*theta1 + i*theta1*x1^2/2"),
                          x_seed=[0.3])
    assert abs(cp.point[0]) <= 1e-10


def test_find_critical_shifted():
    cp = ph.find_critical(make_phase("(x1-0.5)*theta1"), x_seed=[0.2])
    assert cp.point[0] == pytest.approx(0.5)


def test_classify_nondegenerate_1d():
    phi = make_phase(LINEAR)
    cls = ph.classify(phi, [ph.find_critical(phi)])
    assert (cls.M, cls.excess, cls.kind) == (1, 0, "non-degenerate")


def test_classify_dummy_theta2_clean():
    phi = make_phase("x1*theta1", theta=2)
    cls = ph.classify(phi, [ph.find_critical(phi)])
    assert (cls.M, cls.N, cls.excess, cls.kind) == (1, 2, 1, "clean")
    assert cls.omega_dprime == ("theta2",)


def test_classify_2d_identity_block():
    phi = make_phase("x1*theta1 + x2*theta2", theta=2, x=2,
                     direction=(1.0, 1.0))
    cls = ph.classify(phi, [ph.find_critical(phi)])
    assert (cls.M, cls.excess) == (2, 0)


def test_classify_invariant_under_theta_permutation():
    a = make_phase("x1*theta1", theta=2, direction=(1.0, 0.0))
    b = make_phase("x1*theta2", theta=2, direction=(0.0, 1.0))
    ea = ph.classify(a, [ph.find_critical(a)]).excess
    eb = ph.classify(b, [ph.find_critical(b)]).excess
    assert ea == eb == 1


def test_classify_rejects_complex_samples():
    phi = make_phase(LINEAR)
    cp = ph.find_critical(phi)
    fake = ph.CriticalPoint(cp.point + 1e-3j, cp.residual, False)
    with pytest.raises(RankError):
        ph.classify(phi, [fake])


def test_lambda_sample_linear():
    phi = make_phase(LINEAR)
    cp = ph.find_critical(phi)
    s = ph.lambda_sample(phi, cp)
    assert s.x[0] == pytest.approx(0.0, abs=1e-12)
    assert s.xi[0] == pytest.approx(1.0)


def test_lambda_sample_fiber_scaling():
    phi = make_phase(LINEAR)
    for t in (0.5, 2.0, 10.0):
        cp = ph.find_critical(phi, theta_scale=t)
        s = ph.lambda_sample(phi, cp)
        assert s.xi[0] == pytest.approx(t, rel=1e-10)


def test_lambda_sample_damped_phase():
    phi = make_phase("x1*theta1 + i*theta1*x1^2/2")
    cp = ph.find_critical(phi)
    s = ph.lambda_sample(phi, cp)
    # xi = theta (1 + i x) at x = 0
    assert s.xi[0] == pytest.approx(1.0, abs=1e-10)


def test_scaling_commutes_with_lambda():
    phi = make_phase(DAMPED)
    base = ph.lambda_sample(phi, ph.find_critical(phi, theta_scale=1.0))
    for t in (0.5, 2.0, 10.0):
        s = ph.lambda_sample(phi, ph.find_critical(phi, theta_scale=t))
        assert np.allclose(s.x, base.x, atol=1e-10)
        assert np.allclose(s.xi, t * base.xi, rtol=1e-10)


def test_euler_residual_on_shipped_phases():
    rng = np.random.default_rng(2)
    for src, nth in ((LINEAR, 1), (DAMPED, 2), ("x1*theta1 + x2*theta2", 2)):
        nx = 2 if "x2" in src else 1
        phi = make_phase(src, theta=nth, x=nx,
                         direction=tuple([1.0] * nth))
        for pt in phi.sample_points(rng, 200):
            v = phi.value(pt)
            assert phi.euler_residual(pt) <= 1e-10 * (1 + abs(v))


def test_dimension_consistency_nondegenerate():
    # for e=0 the Lagrangian map is injective on the critical tangent
    phi = make_phase(LINEAR)
    cp = ph.find_critical(phi)
    D = ph.differential_matrix(phi, cp.real_point())
    _, s, vh = np.linalg.svd(D)
    kernel = vh[int(np.count_nonzero(s >= 1e-8 * s[0])):].conj().T
    assert kernel.shape[1] == phi.n
    x_rows = np.zeros((phi.n, len(phi.var_names)))
    for i, nm in enumerate(phi.base_names):
        x_rows[i, phi.index(nm)] = 1.0
    dxi = phi.hessian_rows(cp.real_point(), phi.base_names, phi.var_names)
    lam_map = np.vstack([x_rows, dxi]) @ kernel
    assert np.linalg.matrix_rank(lam_map) == phi.n


def test_positivity_linear_passes():
    rep = ph.positivity_check(make_phase(LINEAR))
    assert rep.is_xi_graph
    assert rep.passed
    assert rep.min_im == pytest.approx(0.0, abs=1e-12)


def test_positivity_damped_passes():
    rep = ph.positivity_check(make_phase(DAMPED))
    assert rep.passed
    assert rep.min_im >= -1e-10


def test_positivity_negative_fails():
    rep = ph.positivity_check(make_phase(BAD))
    assert rep.is_xi_graph
    assert not rep.passed
    assert rep.min_im < -1e-6
