"""Principal symbol machinery: auxiliary psi, sqrt(d phi), pairings.

The symbol of an oscillatory distribution is sampled pointwise: value at
a Lagrangian point plus homogeneity bookkeeping.  All branch choices go
through the determinant homotopy, with the bordered Hessian of
F = phi - psi supplying the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprlang, oracle
from . import phase as ph
from .almost_analytic import AAExtension
from .branch import BranchedSqrt, branched_inv_sqrt_det
from .bumps import Bump, plateau
from .errors import ConvergenceError, DomainError, FiberError, RankError
from .newton import damped_newton


@dataclass(frozen=True)
class Amplitude:
    """Homogeneous top-order amplitude with its declared degree."""

    expr: exprlang.Expr
    degree: float

    def order_m(self, n: int, N: int) -> float:
        # classical grading: degree = m + (n - 2N)/4
        return self.degree - (n - 2 * N) / 4


def validate_amplitude(phi: ph.PhaseFunction, amp: Amplitude,
                       n_samples: int = 60, seed: int = 0) -> float:
    """Euler residual of the declared homogeneity degree; raises if the
    amplitude is not homogeneous of that degree on the patch."""
    from . import jets

    rng = np.random.default_rng(seed)
    worst = 0.0
    for pt in phi.sample_points(rng, n_samples):
        env = dict(zip(phi.var_names, pt))
        a = complex(exprlang.evaluate(amp.expr, env))
        th = phi.split(pt)["theta"]
        grad = jets.gradient(amp.expr, phi.layout, pt, phi.freq_names)
        resid = abs(complex(th @ grad) - amp.degree * a) / (1.0 + abs(a))
        worst = max(worst, resid)
    if worst > 1e-10:
        raise DomainError(
            f"amplitude is not homogeneous of degree {amp.degree}: "
            f"Euler residual {worst:.2e}")
    return worst


# ---------------------------------------------------------------------------
# auxiliary psi


@dataclass
class AuxPsi:
    x0: np.ndarray
    xi0: np.ndarray
    lam: float
    expr: exprlang.Expr
    base_point: np.ndarray  # full real critical point the psi was built at


def make_psi(phi: ph.PhaseFunction, cp: ph.CriticalPoint, lam: float = 1.0,
             classification: ph.PhaseClassification | None = None) -> AuxPsi:
    """psi(x) = phi_x(x0,theta0) . (x-x0) - (lam/2)|x-x0|^2 at a real
    critical point; checks that F = phi - psi is a valid stationary-phase
    setup in the (x, theta') block."""
    if lam <= 0:
        raise DomainError("psi concavity lam must be positive")
    if not cp.is_real or cp.residual > 1e-10:
        raise RankError("psi construction needs a real critical point")
    pt = cp.real_point()
    xi = phi.gradient(pt, phi.base_names)
    if np.max(np.abs(xi.imag)) > 1e-9 * (1 + np.max(np.abs(xi))):
        raise DomainError("phi_x is not real at the base point")
    x0 = phi.split(pt)["x"].real
    terms = []
    for i, nm in enumerate(phi.base_names):
        dx = exprlang.sub(exprlang.var(nm), exprlang.num(x0[i]))
        terms.append(exprlang.mul(exprlang.num(float(xi[i].real)), dx))
        terms.append(exprlang.mul(exprlang.num(-lam / 2),
                                  exprlang.mul(dx, dx)))
    expr = terms[0]
    for tterm in terms[1:]:
        expr = exprlang.add(expr, tterm)
    psi = AuxPsi(x0, xi.real.astype(float), lam, expr, pt)
    cls = classification or ph.classify(phi, [cp])
    G = bordered_hessian(phi, psi, pt, cls.omega_prime)
    if abs(np.linalg.det(G)) < 1e-10:
        raise RankError("det d2(phi - psi) = 0 at the base point: phase/psi "
                        "incompatible (upstream classification error)")
    return psi


def f_expression(phi: ph.PhaseFunction, psi: AuxPsi) -> exprlang.Expr:
    return exprlang.sub(phi.expr, psi.expr)


def bordered_hessian(phi: ph.PhaseFunction, psi: AuxPsi, point,
                     omega_prime) -> np.ndarray:
    """Hessian of F = phi - psi in the (x, omega') block at a point."""
    F = f_expression(phi, psi)
    names = phi.base_names + list(omega_prime)
    point = np.asarray(point, dtype=complex)
    if np.all(point.imag == 0):
        from . import jets
        H = jets.hessian(F, phi.layout, point, phi.var_names)
        idx = [phi.index(nm) for nm in names]
        return H[np.ix_(idx, idx)]
    ext = AAExtension(F, phi.layout, K=max(4, phi.extension.K - 2))
    return ext.hessian(point, names, names)


@dataclass
class SqrtDPhi:
    base_point: np.ndarray
    matrix: np.ndarray        # M = (1/i) x bordered Hessian
    value: complex
    grade: float              # (N - e)/2
    branch: BranchedSqrt
    omega_prime: tuple[str, ...]


def sqrt_dphi(phi: ph.PhaseFunction, classification: ph.PhaseClassification,
              cp: ph.CriticalPoint, psi: AuxPsi,
              point=None) -> SqrtDPhi:
    """Branch-continued [det (1/i) bordered Hessian]^(-1/2); homogeneity
    grade (N - e)/2."""
    pt = np.asarray(point if point is not None else cp.point, dtype=complex)
    G = bordered_hessian(phi, psi, pt, classification.omega_prime)
    br = branched_inv_sqrt_det(G)
    grade = (phi.N - classification.excess) / 2
    return SqrtDPhi(pt, G / 1j, br.value, grade, br,
                    tuple(classification.omega_prime))


# ---------------------------------------------------------------------------
# the pairing map


@dataclass
class PairingReport:
    t_grid: tuple[float, ...]
    oracle_values: tuple[complex, ...]
    predictions: tuple[complex, ...]
    rel_errors: tuple[float, ...]
    fit: oracle.OrderFit
    predicted_order: float
    sqrt_dphi_value: complex

    @property
    def fitted_order(self) -> float:
        return self.fit.slope

    def max_rel_error(self) -> float:
        return max(self.rel_errors)


def pairing_T(phi: ph.PhaseFunction, amp: Amplitude, psi: AuxPsi,
              cutoff: Bump, t_grid,
              classification: ph.PhaseClassification | None = None,
              spec: oracle.QuadratureSpec | None = None,
              window_mults=(0.3, 0.5, 2.0, 3.0)) -> PairingReport:
    """Pairing of I(phi, a) against e^{-it psi} u, two ways.

    Predicted top term after the theta = t eta substitution versus a
    direct quadrature of the scaled integral over (x, eta) with a smooth
    radial window that is flat around the stationary radius.
    """
    if phi.fiber_names:
        raise DomainError("tensor pairing oracle handles pure (x, theta) "
                          "phases; composed kernels use the nested oracle")
    validate_amplitude(phi, amp)
    cp = ph.CriticalPoint(psi.base_point.astype(complex), 0.0, True)
    cls = classification or ph.classify(phi, [cp])
    sq = sqrt_dphi(phi, cls, cp, psi)
    n, N = phi.n, phi.N
    e = cls.excess
    theta0 = phi.split(psi.base_point)["theta"].real
    r0 = float(np.linalg.norm(theta0))
    x0 = psi.x0
    env0 = dict(zip(phi.var_names, psi.base_point))
    a0 = complex(exprlang.evaluate(amp.expr, env0))
    u0 = cutoff.value(x0)
    predicted_power = amp.degree + (N - n) / 2 + e / 2
    const = (2 * np.pi) ** ((n + N) / 2) * a0 * u0 * sq.value if e == 0 else None

    lo_in, lo_flat, hi_flat, hi_out = (m * r0 for m in window_mults)
    F = f_expression(phi, psi)
    direction = theta0 / r0

    def phase_fn(coords):
        env = dict(zip(phi.base_names + phi.freq_names, coords))
        return np.asarray(exprlang.evaluate(F, env), dtype=complex)

    def amp_fn(coords):
        env = dict(zip(phi.base_names + phi.freq_names, coords))
        a = np.asarray(exprlang.evaluate(amp.expr, env), dtype=complex)
        xs = np.stack([c.real for c in coords[:n]], axis=-1)
        u = cutoff.values(xs)
        s = np.sqrt(sum(c.real**2 for c in coords[n:]))
        win = plateau(s, hi_flat, hi_out) * (1.0 - plateau(s, lo_in, lo_flat))
        if N > 1:
            # keep the window inside the cone; kills the mirror branch
            cosang = sum(c.real * d for c, d in zip(coords[n:], direction))
            cosang = cosang / np.where(s > 0, s, 1.0)
            win = win * plateau(1.0 - cosang, 0.3, 0.8)
        return a * u * win

    box = tuple((lo, hi) for lo, hi in phi.patch.x_box)
    if N == 1:
        # one frequency variable: the cone is a half line
        sgn = float(np.sign(theta0[0]))
        eta = (0.95 * lo_in, 1.02 * hi_out)
        box += ((min(sgn * eta[0], sgn * eta[1]),
                 max(sgn * eta[0], sgn * eta[1])),)
    else:
        box += tuple((th - 1.02 * hi_out, th + 1.02 * hi_out) for th in theta0)
    spec = spec or oracle.QuadratureSpec(box=box)

    values, preds, rels = [], [], []
    for t in t_grid:
        J = oracle.osc_integral(phase_fn, amp_fn, t, spec)
        val = t ** (N + amp.degree) * J
        values.append(val)
        if const is not None:
            pred = t ** predicted_power * const
            preds.append(pred)
            scale = max(abs(pred), abs(val))
            rels.append(abs(val - pred) / scale if scale > 0 else 0.0)
    fit = oracle.fit_order([(t, abs(v)) for t, v in zip(t_grid, values)])
    return PairingReport(tuple(t_grid), tuple(values), tuple(preds),
                         tuple(rels), fit, predicted_power, sq.value)


# ---------------------------------------------------------------------------
# symbol evaluation


@dataclass
class SymbolValue:
    x: np.ndarray
    xi: np.ndarray
    value: complex
    grade: float          # m - e/2 + n/4
    order: float          # sigma superscript: m + e/2
    provenance: dict

    def as_dict(self) -> dict:
        return {"value": complex(self.value), "grade": self.grade,
                "order": self.order,
                "x": [complex(v) for v in self.x],
                "xi": [complex(v) for v in self.xi],
                "provenance": {k: v for k, v in self.provenance.items()
                               if not isinstance(v, (np.ndarray, BranchedSqrt))}}


def principal_symbol(phi: ph.PhaseFunction, amp: Amplitude,
                     classification: ph.PhaseClassification,
                     cp: ph.CriticalPoint, psi: AuxPsi,
                     fiber_box: dict[str, tuple[float, float]] | None = None,
                     base_nodes: int = 12, fiber_tol: float = 1e-8,
                     validate: bool = True,
                     force_fiber_path: bool = False) -> SymbolValue:
    """sigma(A) at the Lagrangian point over cp.

    Non-degenerate case: amplitude top term times sqrt(d phi).  Clean
    case: Gauss-Legendre integral of the same integrand over the excess
    fiber, re-solving the pinned critical system at every node.  With
    ``force_fiber_path`` an excess-zero symbol still goes through the
    (zero-dimensional) fiber machinery, as a cross-check of the two
    formulas.
    """
    if validate:
        validate_amplitude(phi, amp)
    e = classification.excess
    n, N = phi.n, phi.N
    m = amp.order_m(n, N)
    grade = m - e / 2 + n / 4
    order = m + e / 2
    xi0 = phi.gradient(cp.real_point(), phi.base_names)
    x0 = phi.split(cp.real_point())["x"]

    if e == 0 and force_fiber_path:
        pt, resid = ph._solve_fiber_point(phi, xi0, cp.point.copy(), {})
        a0 = complex(exprlang.evaluate(amp.expr,
                                       dict(zip(phi.var_names, pt))))
        sq = sqrt_dphi(phi, classification, cp, psi, point=pt)
        return SymbolValue(x0, xi0, a0 * sq.value, grade, order,
                           {"amplitude_top": a0, "sqrt_dphi": sq.value,
                            "fiber_dim": 0, "fiber_residual": resid})

    if e == 0:
        a0 = complex(exprlang.evaluate(amp.expr,
                                       dict(zip(phi.var_names, cp.point))))
        sq = sqrt_dphi(phi, classification, cp, psi)
        return SymbolValue(x0, xi0, a0 * sq.value, grade, order,
                           {"amplitude_top": a0, "sqrt_dphi": sq.value,
                            "branch_subdivisions": sq.branch.subdivisions})

    if not fiber_box:
        raise FiberError("excess e > 0 needs a compact fiber box over the "
                         "excess variables")
    missing = [nm for nm in classification.omega_dprime if nm not in fiber_box]
    if missing:
        raise FiberError(f"fiber box missing excess variables {missing}")
    dnames = list(classification.omega_dprime)

    def node_value(node: np.ndarray) -> complex:
        fixed = dict(zip(dnames, node.astype(complex)))
        pt, resid = ph._solve_fiber_point(phi, xi0, cp.point.copy(), fixed)
        a_val = complex(exprlang.evaluate(amp.expr,
                                          dict(zip(phi.var_names, pt))))
        if abs(a_val) == 0.0:
            return 0.0 + 0.0j
        sq = sqrt_dphi(phi, classification, cp, psi, point=pt)
        return a_val * sq.value

    # amplitude support must stay inside the declared box
    for k, nm in enumerate(dnames):
        lo, hi = fiber_box[nm]
        for edge in (lo, hi):
            node = np.array([0.5 * (fiber_box[d][0] + fiber_box[d][1])
                             for d in dnames])
            node[k] = edge
            if abs(node_value(node)) > 1e-12:
                raise FiberError(
                    f"amplitude support leaks through the fiber box at "
                    f"{nm}={edge}")

    rules = None
    prev = None
    q = base_nodes
    for _ in range(6):
        rules = [oracle.panel_rule(*fiber_box[nm], q) for nm in dnames]
        mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
        wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        weights = np.ones_like(wmesh[0])
        for wm in wmesh:
            weights = weights * wm
        total = 0.0 + 0.0j
        for node, wgt in zip(nodes, weights.ravel()):
            total += wgt * node_value(node)
        if prev is not None and abs(total - prev) <= fiber_tol * max(1.0, abs(total)):
            return SymbolValue(x0, xi0, total, grade, order,
                               {"fiber_nodes": int(nodes.shape[0]),
                                "fiber_delta": abs(total - prev),
                                "omega_dprime": dnames})
        prev = total
        q *= 2
    raise ConvergenceError(
        "fiber quadrature did not stabilize under node doubling")
