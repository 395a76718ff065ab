import numpy as np
import pytest

from fiocalc.branch import branched_inv_sqrt_det
from fiocalc.errors import HomotopyError


def _tracking_oracle(H, steps=10**4):
    """Independent fine-grained path tracker: at each step pick the square
    root of det(A(s))^-1 closer to the previous value."""
    H = np.asarray(H, dtype=complex)
    A0 = H / 1j
    eye = np.eye(H.shape[0])
    prev = 1.0 + 0.0j
    for s in np.linspace(1.0, 0.0, steps):
        d = complex(np.linalg.det((1 - s) * A0 + s * eye))
        cand = 1.0 / np.sqrt(d)
        prev = cand if abs(cand - prev) <= abs(-cand - prev) else -cand
    return prev


def _random_valid_hessian(rng, k):
    # S + iP with P positive definite: (1/i)H has spectrum in the open
    # right half plane, so the homotopy stays in GL
    S = rng.normal(size=(k, k))
    S = 0.5 * (S + S.T)
    R = rng.normal(size=(k, k))
    P = R @ R.T + (0.3 + rng.uniform()) * np.eye(k)
    return S + 1j * P


def test_identity_path():
    for k in (1, 2, 5):
        res = branched_inv_sqrt_det(1j * np.eye(k))
        assert res.value == pytest.approx(1.0)
        assert res.verify() <= 1e-12


def test_fresnel_plus():
    res = branched_inv_sqrt_det(np.array([[1.0]]))
    want = np.exp(1j * np.pi / 4)
    assert res.value == pytest.approx(want, abs=1e-12)
    assert res.value**2 * (-1j) == pytest.approx(1.0, abs=1e-12)
    assert _tracking_oracle([[1.0]]) == pytest.approx(want, abs=1e-3)


def test_fresnel_minus():
    res = branched_inv_sqrt_det(np.array([[-1.0]]))
    want = np.exp(-1j * np.pi / 4)
    assert res.value == pytest.approx(want, abs=1e-12)
    assert _tracking_oracle([[-1.0]]) == pytest.approx(want, abs=1e-3)


def test_against_tracking_oracle_random():
    rng = np.random.default_rng(5)
    for _ in range(10):
        H = _random_valid_hessian(rng, int(rng.integers(1, 5)))
        res = branched_inv_sqrt_det(H)
        assert res.value == pytest.approx(_tracking_oracle(H), rel=1e-3)


def test_inverse_square_identity_on_random():
    rng = np.random.default_rng(11)
    for _ in range(100):
        H = _random_valid_hessian(rng, int(rng.integers(1, 7)))
        res = branched_inv_sqrt_det(H)
        assert res.verify() <= 1e-10


def test_conjugate_problem_symmetry():
    # conjugating the oscillatory problem sends the Hessian H to -conj(H)
    # and the branch value to its conjugate
    rng = np.random.default_rng(23)
    for _ in range(50):
        H = _random_valid_hessian(rng, int(rng.integers(1, 5)))
        a = branched_inv_sqrt_det(H).value
        b = branched_inv_sqrt_det(-np.conj(H)).value
        assert b == pytest.approx(np.conj(a), abs=1e-10 * abs(a))


def test_block_additivity():
    rng = np.random.default_rng(31)
    for _ in range(50):
        H1 = _random_valid_hessian(rng, int(rng.integers(1, 4)))
        H2 = _random_valid_hessian(rng, int(rng.integers(1, 4)))
        k1, k2 = H1.shape[0], H2.shape[0]
        H = np.zeros((k1 + k2, k1 + k2), dtype=complex)
        H[:k1, :k1] = H1
        H[k1:, k1:] = H2
        prod = branched_inv_sqrt_det(H1).value * branched_inv_sqrt_det(H2).value
        assert branched_inv_sqrt_det(H).value == pytest.approx(prod, rel=1e-10)


def test_subdivision_refinement_stable():
    rng = np.random.default_rng(41)
    H = _random_valid_hessian(rng, 4)
    a = branched_inv_sqrt_det(H, initial_steps=8).value
    b = branched_inv_sqrt_det(H, initial_steps=16).value
    assert abs(a - b) <= 1e-12


def test_positive_definite_imaginary_hessian():
    rng = np.random.default_rng(53)
    for _ in range(20):
        k = int(rng.integers(1, 6))
        R = rng.normal(size=(k, k))
        P = R @ R.T + 0.5 * np.eye(k)
        res = branched_inv_sqrt_det(1j * P)
        want = np.linalg.det(P) ** -0.5
        assert abs(res.value.imag) <= 1e-12 * abs(res.value)
        assert res.value.real == pytest.approx(want, rel=1e-10)


def test_homotopy_leaves_gl():
    # (1/i)H = -1 crosses zero at s = 1/2
    with pytest.raises(HomotopyError):
        branched_inv_sqrt_det(np.array([[-1j]]))
