"""Phase functions on conic patches.

A phase lives on an x-box times a theta-cone (unit direction, angular
radius, radial interval).  Composed phases add degree-zero ``fiber``
variables (the y-block of the omega chart); the critical equations and
the classification run over fiber + frequency variables jointly, while
the Euler homogeneity operator only involves the frequency block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import exprlang, jets
from .almost_analytic import AAExtension
from .errors import LayoutError, RankError
from .newton import damped_newton


@dataclass(frozen=True)
class ConicPatch:
    x_box: tuple[tuple[float, float], ...]
    theta_direction: tuple[float, ...]
    theta_angle: float = 0.3
    theta_radius: tuple[float, float] = (0.5, 2.0)
    fiber_box: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        d = np.asarray(self.theta_direction, dtype=float)
        n = float(np.linalg.norm(d))
        if n == 0:
            raise LayoutError("theta direction must be nonzero")
        object.__setattr__(self, "theta_direction",
                           tuple(float(v) for v in d / n))

    def x_center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.x_box])

    def sample_theta(self, rng: np.random.Generator) -> np.ndarray:
        d = np.asarray(self.theta_direction)
        v = rng.normal(size=d.size)
        v -= d * (v @ d)
        nv = np.linalg.norm(v)
        ang = rng.uniform(0.0, self.theta_angle)
        u = d if nv == 0 else np.cos(ang) * d + np.sin(ang) * (v / nv)
        r = rng.uniform(*self.theta_radius)
        return r * u


class PhaseFunction:
    """phi(x, theta) homogeneous of degree 1 in theta on a conic patch."""

    def __init__(self, expr: exprlang.Expr, layout: exprlang.VarLayout,
                 patch: ConicPatch, ext_order: int = 6):
        self.expr = expr
        self.layout = layout
        self.patch = patch
        self.base_names = layout.group_names("base")
        self.fiber_names = layout.group_names("fiber")
        self.freq_names = layout.group_names("frequency")
        self.omega_names = self.fiber_names + self.freq_names
        self.var_names = self.base_names + self.fiber_names + self.freq_names
        self.n = len(self.base_names)
        self.N = len(self.omega_names)
        if not self.freq_names:
            raise LayoutError("phase layout needs a frequency group")
        if len(self.patch.x_box) != self.n:
            raise LayoutError("x-box does not match the base dimension")
        if len(self.patch.theta_direction) != len(self.freq_names):
            raise LayoutError("theta direction does not match the frequency dimension")
        if len(self.patch.fiber_box) != len(self.fiber_names):
            raise LayoutError("fiber box does not match the fiber dimension")
        self.extension = AAExtension(expr, layout, K=ext_order)
        if self.extension.names != self.var_names:
            # params would have to be frozen before building a phase
            raise LayoutError("phase layouts cannot carry param groups")

    # -- point utilities ----------------------------------------------------

    def index(self, name: str) -> int:
        return self.var_names.index(name)

    def split(self, pt: np.ndarray) -> dict[str, np.ndarray]:
        pt = np.asarray(pt, dtype=complex)
        nb, nf = self.n, len(self.fiber_names)
        return {"x": pt[:nb], "fiber": pt[nb:nb + nf], "theta": pt[nb + nf:]}

    def assemble(self, x, theta, fiber=()) -> np.ndarray:
        return np.concatenate([np.asarray(x, dtype=complex).ravel(),
                               np.asarray(fiber, dtype=complex).ravel(),
                               np.asarray(theta, dtype=complex).ravel()])

    def sample_points(self, rng: np.random.Generator, count: int) -> np.ndarray:
        pts = np.empty((count, len(self.var_names)), dtype=complex)
        for i in range(count):
            x = np.array([rng.uniform(lo, hi) for lo, hi in self.patch.x_box])
            fib = np.array([rng.uniform(lo, hi) for lo, hi in self.patch.fiber_box])
            pts[i] = self.assemble(x, self.patch.sample_theta(rng), fib)
        return pts

    def value(self, pt) -> complex:
        return exprlang.evaluate(self.expr,
                                 dict(zip(self.var_names,
                                          np.asarray(pt, dtype=complex))))

    def gradient(self, pt, wrt: list[str] | None = None) -> np.ndarray:
        pt = np.asarray(pt, dtype=complex)
        if np.all(pt.imag == 0):
            return jets.gradient(self.expr, self.layout, pt,
                                 wrt or self.var_names)
        return self.extension.gradient(pt, wrt or self.var_names)

    def hessian_rows(self, pt, rows: list[str],
                     cols: list[str] | None = None) -> np.ndarray:
        pt = np.asarray(pt, dtype=complex)
        cols = cols or self.var_names
        if np.all(pt.imag == 0):
            H = jets.hessian(self.expr, self.layout, pt, self.var_names)
            ri = [self.index(r) for r in rows]
            ci = [self.index(c) for c in cols]
            return H[np.ix_(ri, ci)]
        return self.extension.hessian(pt, rows, cols)

    def euler_residual(self, pt) -> float:
        g = self.gradient(pt, self.freq_names)
        th = self.split(pt)["theta"]
        v = self.value(pt)
        return abs(complex(th @ g) - v)


# ---------------------------------------------------------------------------
# validation


@dataclass
class PhaseValidation:
    passed: bool
    max_euler_rel: float
    min_im: float
    min_dphi: float
    n_samples: int
    failures: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"passed": self.passed, "max_euler_rel": self.max_euler_rel,
                "min_im": self.min_im, "min_dphi": self.min_dphi,
                "n_samples": self.n_samples, "failures": list(self.failures)}


def validate_phase(phi: PhaseFunction, n_samples: int = 200,
                   seed: int = 0) -> PhaseValidation:
    """Sampled report of the positive-type axioms: Euler homogeneity,
    nonnegative imaginary part, nonvanishing differential."""
    rng = np.random.default_rng(seed)
    pts = phi.sample_points(rng, n_samples)
    max_euler, min_im, min_dphi = 0.0, np.inf, np.inf
    for pt in pts:
        v = phi.value(pt)
        max_euler = max(max_euler, phi.euler_residual(pt) / (1.0 + abs(v)))
        min_im = min(min_im, v.imag)
        g = phi.gradient(pt)
        min_dphi = min(min_dphi, float(np.linalg.norm(g)))
    failures = []
    if max_euler > 1e-10:
        failures.append(f"euler residual {max_euler:.2e} > 1e-10")
    if min_im < -1e-12:
        failures.append(f"min Im phi {min_im:.2e} < -1e-12")
    if min_dphi <= 1e-8:
        failures.append(f"min |d phi| {min_dphi:.2e} vanishes")
    return PhaseValidation(not failures, max_euler, min_im, min_dphi,
                           n_samples, failures)


# ---------------------------------------------------------------------------
# critical points


@dataclass
class CriticalPoint:
    point: np.ndarray          # full (x, fiber, theta) coordinates, complex
    residual: float
    is_real: bool

    def real_point(self) -> np.ndarray:
        return self.point.real.astype(complex)


def find_critical(phi: PhaseFunction, theta_direction=None, x_seed=None,
                  solve_vars: list[str] | None = None,
                  theta_scale: float = 1.0, fiber_seed=None,
                  tol: float = 1e-12, max_iter: int = 50) -> CriticalPoint:
    """Damped Newton on the critical equations d_omega phi = 0.

    The chart is chosen by ``solve_vars`` (which coordinates move); the
    rest stay frozen at their seed values.  Least-squares steps make the
    excess directions of clean phases harmless.
    """
    if theta_direction is None:
        theta_direction = np.asarray(phi.patch.theta_direction)
    theta0 = theta_scale * np.asarray(theta_direction, dtype=float)
    x0 = np.asarray(x_seed if x_seed is not None else phi.patch.x_center(),
                    dtype=float)
    fib0 = np.asarray(fiber_seed if fiber_seed is not None
                      else [0.5 * (lo + hi) for lo, hi in phi.patch.fiber_box],
                      dtype=float)
    start = phi.assemble(x0, theta0, fib0)
    if solve_vars is None:
        solve_vars = phi.base_names if not phi.fiber_names else phi.omega_names
    idx = [phi.index(v) for v in solve_vars]

    def with_unknowns(u):
        pt = start.copy()
        pt[idx] = u
        return pt

    def fun(u):
        return phi.gradient(with_unknowns(u), phi.omega_names)

    def jac(u):
        return phi.hessian_rows(with_unknowns(u), phi.omega_names, solve_vars)

    j0 = np.atleast_2d(jac(start[idx]))
    s0 = np.linalg.svd(j0, compute_uv=False)
    expected = int(np.count_nonzero(s0 >= 1e-8 * s0[0])) if s0[0] > 0 else 0
    if expected == 0:
        raise RankError("critical system Jacobian vanishes at the seed")
    res = damped_newton(fun, jac, start[idx], tol=tol, max_iter=max_iter,
                        expected_rank=expected)
    pt = with_unknowns(res.x)
    is_real = bool(np.max(np.abs(pt.imag)) <= 1e-12 * (1 + np.max(np.abs(pt))))
    return CriticalPoint(pt, res.residual, is_real)


# ---------------------------------------------------------------------------
# classification


@dataclass
class PhaseClassification:
    M: int
    N: int
    excess: int
    kind: str                      # non-degenerate | clean | degenerate-invalid
    omega_prime: tuple[str, ...]
    omega_dprime: tuple[str, ...]
    ranks: tuple[int, ...]
    singular_values: tuple[float, ...]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "excess": self.excess, "M": self.M,
                "N": self.N, "omega_prime": list(self.omega_prime),
                "omega_dprime": list(self.omega_dprime),
                "ranks": list(self.ranks)}


def differential_matrix(phi: PhaseFunction, pt) -> np.ndarray:
    """Rows d(d phi / d omega_j) over all phase variables, at a point."""
    return phi.hessian_rows(pt, phi.omega_names, phi.var_names)


def classify(phi: PhaseFunction, critical_points: list[CriticalPoint],
             svd_threshold: float = 1e-8) -> PhaseClassification:
    """Rank classification of the critical differentials.

    The theta'/theta'' split is a greedy pivoted row selection; the rank
    decision uses singular values relative to the largest one (the
    differentials come from jets, so the only noise is rounding).
    """
    if not critical_points:
        raise RankError("classification needs at least one critical point")
    ranks, svals = [], None
    for cp in critical_points:
        if cp.residual > 1e-10:
            raise RankError("classification got a non-critical sample")
        if not cp.is_real:
            raise RankError("classification samples must be real")
        D = differential_matrix(phi, cp.real_point())
        s = np.linalg.svd(D, compute_uv=False)
        rank = int(np.count_nonzero(s >= svd_threshold * s[0])) if s[0] > 0 else 0
        ranks.append(rank)
        if svals is None:
            svals = s
    M = min(ranks)
    e = phi.N - M
    if len(set(ranks)) > 1:
        kind = "degenerate-invalid"
    else:
        kind = "non-degenerate" if e == 0 else "clean"
    D0 = differential_matrix(phi, critical_points[0].real_point())
    _, _, piv = scipy.linalg.qr(D0.T, pivoting=True)
    chosen = sorted(piv[:M])
    omega_prime = tuple(phi.omega_names[i] for i in chosen)
    omega_dprime = tuple(nm for i, nm in enumerate(phi.omega_names)
                         if i not in chosen)
    if M > 0:
        sub = np.linalg.svd(D0[chosen], compute_uv=False)
        if int(np.count_nonzero(sub >= svd_threshold * sub[0])) < M:
            raise RankError("pivoted row selection failed to reach rank M")
    return PhaseClassification(M, phi.N, e, kind, omega_prime, omega_dprime,
                               tuple(ranks), tuple(float(v) for v in svals))


# ---------------------------------------------------------------------------
# Lagrangian samples and positivity


@dataclass
class LagrangianSample:
    x: np.ndarray
    xi: np.ndarray
    im_phase_at_real_point: float


def lambda_sample(phi: PhaseFunction, cp: CriticalPoint) -> LagrangianSample:
    """Image of a critical point under (x, theta) -> (x, d_x phi)."""
    if cp.residual > 1e-10:
        raise RankError("lambda sample needs residual <= 1e-10")
    xi = phi.gradient(cp.point, phi.base_names)
    x = phi.split(cp.point)["x"]
    imv = complex(phi.value(cp.real_point())).imag
    return LagrangianSample(x, xi, imv)


@dataclass
class PositivityReport:
    passed: bool
    is_xi_graph: bool
    min_im: float | None
    graph: list[dict]
    note: str = ""

    def as_dict(self) -> dict:
        return {"passed": self.passed, "is_xi_graph": self.is_xi_graph,
                "min_im": self.min_im, "note": self.note,
                "graph_samples": len(self.graph)}


def _solve_fiber_point(phi: PhaseFunction, xi_target: np.ndarray,
                       seed_point: np.ndarray, fixed_dprime: dict | None = None,
                       tol: float = 1e-11):
    """Point of the critical set with d_x phi pinned to xi_target.

    Unknowns are the base variables plus the non-excess omega block;
    excess coordinates stay frozen (supplied by the caller when e > 0).
    """
    fixed_dprime = fixed_dprime or {}
    solve_names = [nm for nm in phi.var_names if nm not in fixed_dprime]
    idx = [phi.index(nm) for nm in solve_names]
    start = seed_point.copy()
    for nm, v in fixed_dprime.items():
        start[phi.index(nm)] = v

    def with_unknowns(u):
        pt = start.copy()
        pt[idx] = u
        return pt

    def fun(u):
        pt = with_unknowns(u)
        g_om = phi.gradient(pt, phi.omega_names)
        g_x = phi.gradient(pt, phi.base_names) - xi_target
        return np.concatenate([g_om, g_x])

    def jac(u):
        pt = with_unknowns(u)
        return phi.hessian_rows(pt, phi.omega_names + phi.base_names,
                                solve_names)

    res = damped_newton(fun, jac, start[idx], tol=tol)
    return with_unknowns(res.x), res.residual


def positivity_check(phi: PhaseFunction, n_xi: int = 7, n_grid: int = 41,
                     seed: int = 0) -> PositivityReport:
    """Positivity of the phase on the patch around the fitted xi-graph.

    Fits x = H(xi) over real xi samples in the cone by re-solving the
    critical system with pinned d_x phi, then reports the minimum of
    Im phi over a real x-grid paired with the real part of the fitted
    theta(xi).  This is the sampled counterpart of requiring Im >= 0 for
    the graph's generating function.
    """
    cp = find_critical(phi)
    cls = classify(phi, [cp])
    D = differential_matrix(phi, cp.real_point())
    # tangent of the critical set = kernel of the differential rows
    _, s, vh = np.linalg.svd(D)
    rank = int(np.count_nonzero(s >= 1e-8 * s[0])) if s.size and s[0] > 0 else 0
    kernel = vh[rank:].conj().T
    xi_rows = phi.hessian_rows(cp.real_point(), phi.base_names, phi.var_names)
    proj = xi_rows @ kernel
    ps = np.linalg.svd(proj, compute_uv=False)
    proj_rank = int(np.count_nonzero(ps >= 1e-8 * ps[0])) if ps.size and ps[0] > 0 else 0
    if proj_rank < phi.n:
        return PositivityReport(False, False, None, [],
                                note="not a xi-graph on this patch")
    xi0 = phi.gradient(cp.real_point(), phi.base_names)
    if np.max(np.abs(xi0.imag)) > 1e-9 * (1 + np.max(np.abs(xi0))):
        return PositivityReport(False, False, None, [],
                                note="base covector not real on the patch")
    rng = np.random.default_rng(seed)
    fixed = {nm: cp.real_point()[phi.index(nm)] for nm in cls.omega_dprime}
    graph, min_im = [], np.inf
    grids = [np.linspace(lo, hi, max(3, int(round(n_grid ** (1 / phi.n)))))
             for lo, hi in phi.patch.x_box]
    mesh = np.meshgrid(*grids, indexing="ij")
    xgrid = np.stack([m.ravel() for m in mesh], axis=-1)
    for k in range(n_xi):
        scale = rng.uniform(*phi.patch.theta_radius)
        pert = rng.normal(size=phi.n) * 0.1 * phi.patch.theta_angle if k else 0.0
        xi = scale * (xi0.real + pert * np.linalg.norm(xi0.real))
        try:
            pt, resid = _solve_fiber_point(phi, xi.astype(complex),
                                           cp.point.copy(), fixed)
        except Exception as err:  # keep scanning; record the failure
            graph.append({"xi": xi.tolist(), "error": str(err)})
            continue
        parts = phi.split(pt)
        theta_r = parts["theta"].real
        fib_r = parts["fiber"].real
        for xrow in xgrid:
            v = phi.value(phi.assemble(xrow, theta_r, fib_r))
            min_im = min(min_im, v.imag)
        graph.append({"xi": xi.tolist(),
                      "H": [complex(v) for v in parts["x"]],
                      "residual": resid})
    if not np.isfinite(min_im):
        return PositivityReport(False, True, None, graph,
                                note="no graph samples could be solved")
    return PositivityReport(bool(min_im >= -1e-10), True, float(min_im), graph)
