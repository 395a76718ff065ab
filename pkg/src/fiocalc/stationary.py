"""Complex stationary phase: critical manifold, leading term, remainder order.

Only the top term of the expansion is assembled exactly; the higher
corrections are verified empirically by fitting the decay order of
``|I(t) - L(t)|`` against the brute-force oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang, jets, oracle
from .almost_analytic import AAExtension
from .branch import BranchedSqrt, branched_inv_sqrt_det
from .bumps import Bump
from .errors import ConvergenceError, DomainError, LayoutError
from .newton import damped_newton

DEFAULT_T_GRID = (1e2, 10**2.5, 1e3, 10**3.5, 1e4)


@dataclass
class SPProblem:
    """Phase F(x, w) with Im F >= 0 and a non-degenerate critical point
    at the origin in x, plus a compactly supported cutoff."""

    F: exprlang.Expr
    layout: exprlang.VarLayout
    cutoff: Bump
    K: int = 8
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    box_margin: float = 1.05
    setup: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x_names = self.layout.group_names("base")
        self.w_names = self.layout.group_names("param")
        if len(self.x_names) != self.cutoff.dim:
            raise LayoutError("cutoff dimension does not match the base block")
        n = len(self.x_names)
        origin = np.zeros(self.layout.size(), dtype=complex)
        g = jets.gradient(self.F, self.layout, origin, self.x_names)
        H = jets.hessian(self.F, self.layout, origin, self.x_names)
        det = complex(np.linalg.det(H))
        grad_norm = float(np.max(np.abs(g)))
        if grad_norm > 1e-10:
            raise DomainError(f"d_x F(0,0) = {grad_norm:.2e}, not critical")
        if abs(det) < 1e-10:
            raise DomainError("det d2_x F(0,0) vanishes (degenerate setup)")
        rng = np.random.default_rng(0)
        min_im = 0.0
        env = {nm: 0.0 + 0.0j for nm in self.layout.names()}
        for _ in range(200):
            for nm, c in zip(self.x_names, self.cutoff.center):
                env[nm] = complex(c + rng.uniform(-1, 1) * self.cutoff.r_out)
            min_im = min(min_im, complex(exprlang.evaluate(self.F, env)).imag)
        if min_im < -1e-12:
            raise DomainError(f"Im F dips to {min_im:.2e} on the working box")
        self.n = n
        self.setup = {"grad_norm": grad_norm, "hess_det": det, "min_im": min_im}

    def x_layout(self) -> exprlang.VarLayout:
        return exprlang.VarLayout(
            [g for g in self.layout.groups if g.role == "base"])

    def extension_at(self, w) -> AAExtension:
        freeze = dict(zip(self.w_names, np.asarray(w, dtype=float))) \
            if self.w_names else None
        return AAExtension(self.F, self.layout, K=self.K, freeze=freeze)

    def oracle_box(self) -> tuple[tuple[float, float], ...]:
        r = self.box_margin * self.cutoff.r_out
        return tuple((c - r, c + r) for c in self.cutoff.center)


def critical_manifold(problem: SPProblem, w=(), seed=None) -> np.ndarray:
    """Complex critical point Z(w) of the extension, from a real seed."""
    ext = problem.extension_at(w)
    n = problem.n
    z0 = np.zeros(n, dtype=complex) if seed is None \
        else np.asarray(seed, dtype=complex)

    def fun(z):
        return ext.gradient(z)

    def jac(z):
        return ext.hessian(z)

    res = damped_newton(fun, jac, z0, tol=1e-12, expected_rank=n)
    return res.x


@dataclass
class SPExpansion:
    w: tuple[float, ...]
    Z: np.ndarray
    phase_value: complex
    C0: complex
    u_at_Z: complex
    n: int
    branch: BranchedSqrt
    im_ok: bool

    def leading(self, t: float) -> complex:
        return (t ** (-self.n / 2) * np.exp(1j * t * self.phase_value)
                * self.C0 * self.u_at_Z)


def leading_term(problem: SPProblem, w=(), seed=None) -> SPExpansion:
    """Top term of the expansion: t^{-n/2} e^{itF~(Z)} C0 u~(Z), with
    (2pi)^{-n/2} C0 the homotopy branch of det((1/i) d2F~(Z))^{-1/2}."""
    Z = critical_manifold(problem, w, seed)
    ext = problem.extension_at(w)
    pt = ext.at(Z)
    value = pt.value()
    H = ext.hessian(Z, pt=pt)
    br = branched_inv_sqrt_det(H)
    C0 = (2 * np.pi) ** (problem.n / 2) * br.value
    uZ = problem.cutoff.ext_value(Z, K=problem.K)
    return SPExpansion(tuple(float(v) for v in np.atleast_1d(w)), Z, value,
                       C0, uZ, problem.n, br, bool(value.imag >= -1e-10))


@dataclass
class RemainderReport:
    fit: oracle.OrderFit | None
    at_noise_floor: bool
    expected_slope: float
    samples: tuple[tuple[float, float], ...]
    expansion: SPExpansion
    oracle_values: tuple[complex, ...]


def remainder_order(problem: SPProblem, w=(), t_grid=None,
                    spec: oracle.QuadratureSpec | None = None) -> RemainderReport:
    """Fit the decay of |I(t) - L(t)|; the expansion structure predicts a
    slope near -(n/2 + 1)."""
    t_grid = tuple(t_grid or problem.t_grid)
    exp = leading_term(problem, w)
    spec = spec or oracle.QuadratureSpec(box=problem.oracle_box())
    lay = problem.x_layout()
    frozen = dict(zip(problem.w_names, np.asarray(w, dtype=float))) or None
    samples, values = [], []
    for t in t_grid:
        val = oracle.osc_integral(problem.F, problem.cutoff, t, spec,
                                  layout=lay, frozen=frozen)
        values.append(val)
        samples.append((t, abs(val - exp.leading(t))))
    expected = -(problem.n / 2 + 1)
    floor = 1e-13
    try:
        fit = oracle.fit_order(samples, floor=floor)
        noise = False
    except ConvergenceError:
        fit = None
        noise = True
    return RemainderReport(fit, noise, expected, tuple(samples), exp,
                           tuple(values))


def decay_order(problem: SPProblem, w=(), t_grid=None,
                spec: oracle.QuadratureSpec | None = None) -> oracle.OrderFit:
    """Fitted decay of the oracle integral itself (degenerate-amplitude
    diagnostics, e.g. cutoffs vanishing at the critical point)."""
    t_grid = tuple(t_grid or problem.t_grid)
    spec = spec or oracle.QuadratureSpec(box=problem.oracle_box())
    lay = problem.x_layout()
    frozen = dict(zip(problem.w_names, np.asarray(w, dtype=float))) or None
    samples = []
    for t in t_grid:
        val = oracle.osc_integral(problem.F, problem.cutoff, t, spec,
                                  layout=lay, frozen=frozen)
        samples.append((t, abs(val)))
    return oracle.fit_order(samples)


def fresnel_reference(H: np.ndarray) -> complex:
    """(2pi)^{n/2} |det H|^{-1/2} e^{i pi sgn(H)/4} for real symmetric H."""
    H = np.asarray(H, dtype=float)
    eig = np.linalg.eigvalsh(H)
    sgn = int(np.sum(eig > 0) - np.sum(eig < 0))
    n = H.shape[0]
    return ((2 * np.pi) ** (n / 2) / math.sqrt(abs(float(np.prod(eig))))
            * np.exp(1j * np.pi * sgn / 4))
