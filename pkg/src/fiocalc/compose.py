"""Composition of oscillatory-kernel operators with clean intersections.

The composed phase Phi(x,z; y,theta,sigma) = phi1(x,y,theta) +
phi2(y,z,sigma) is treated as a phase in the omega chart where the
frequency scaling fixes y: homogeneity, critical sets, classification
and sqrt(d Phi) all reuse the plain phase machinery with y as a
degree-zero fiber block.

The oracle side works with mollified kernels (smooth radial taper at
|theta| = R) applied by nested quadrature.  Kernels whose phase couples
one base pair through one frequency axis, (x_i - y_j) theta_k, get a
fast path: the frequency integral collapses to a one-variable profile
on an equispaced lattice and each operator application becomes a
discrete convolution.  That is a reorganization of the same sums, not
an asymptotic shortcut, so the oracle stays independent of the
stationary-phase machinery it validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from . import exprlang, oracle
from . import phase as ph
from . import symbol as sy
from .bumps import Bump, plateau
from .errors import (BudgetError, ConvergenceError, DomainError, FiberError,
                     LayoutError)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class DifferencePattern:
    """Declares phase = (row - col) * freq with amplitude factors split
    by side; verified numerically before the fast path is taken."""

    row: str                      # base variable on the output side
    col: str                      # base variable on the input side
    freq: str                     # frequency variable carrying the pair
    row_amp: exprlang.Expr | None = None
    col_amp: exprlang.Expr | None = None
    freq_amp: exprlang.Expr | None = None


@dataclass(frozen=True)
class OperatorKernel:
    """Oscillatory kernel I(phase, amplitude) of an operator between the
    two base blocks of its layout."""

    phase: ph.PhaseFunction
    amplitude: sy.Amplitude
    pattern: DifferencePattern | None = None

    @property
    def order(self) -> float:
        n = len(self.phase.base_names)
        return self.amplitude.order_m(n, self.phase.N)

    def verify_pattern(self, rng=None, samples: int = 25) -> None:
        if self.pattern is None:
            raise DomainError("kernel has no declared difference pattern")
        rng = rng or np.random.default_rng(0)
        p = self.pattern
        phi = self.phase
        for pt in phi.sample_points(rng, samples):
            env = dict(zip(phi.var_names, pt))
            want = (env[p.row] - env[p.col]) * env[p.freq]
            got = complex(exprlang.evaluate(phi.expr, env))
            if abs(got - want) > 1e-10 * (1 + abs(want)):
                raise DomainError("phase does not match the declared "
                                  "difference pattern")
            a = complex(exprlang.evaluate(self.amplitude.expr, env))
            parts = 1.0 + 0.0j
            for f in (p.row_amp, p.col_amp, p.freq_amp):
                if f is not None:
                    parts *= complex(exprlang.evaluate(f, env))
            if abs(a - parts) > 1e-10 * (1 + abs(a)):
                raise DomainError("amplitude does not factor along the "
                                  "declared difference pattern")


def make_kernel(phase_src: str, amp_src: str, degree: float,
                layout: exprlang.VarLayout, patch: ph.ConicPatch,
                pattern: DifferencePattern | None = None) -> OperatorKernel:
    phi = ph.PhaseFunction(exprlang.parse(phase_src), layout, patch)
    amp = sy.Amplitude(exprlang.parse(amp_src), degree)
    return OperatorKernel(phi, amp, pattern)


# ---------------------------------------------------------------------------
# composed phase


@dataclass
class CompositionPlan:
    phi: ph.PhaseFunction          # composed phase in the omega chart
    amplitude: sy.Amplitude        # a1 a2 (theta^2 + sigma^2)^{-n_Y/2}
    k1: OperatorKernel
    k2: OperatorKernel
    m1: float
    m2: float
    n_Y: int
    validation: ph.PhaseValidation
    classification: ph.PhaseClassification | None = None
    stationary_points: list[ph.CriticalPoint] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.phi.n

    def omega_chart(self) -> dict:
        return {"omega": "(y (theta^2+sigma^2)^(1/2), theta, sigma)",
                "fiber": list(self.phi.fiber_names),
                "frequency": list(self.phi.freq_names)}


def build_composed_phase(k1: OperatorKernel, k2: OperatorKernel,
                         validate_samples: int = 120) -> CompositionPlan:
    """Phi = phi1 + phi2 over (x, z; y, theta, sigma), with the composed
    amplitude and order bookkeeping."""
    lay1, lay2 = k1.phase.layout, k2.phase.layout
    for lay, want, who in ((lay1, ("x", "y", "theta"), "first"),
                           (lay2, ("y", "z", "sigma"), "second")):
        for g in want:
            if not lay.has_group(g):
                raise LayoutError(f"{who} kernel layout needs group {g!r}")
    n_Y = lay1.group("y").size
    if lay2.group("y").size != n_Y:
        raise LayoutError(
            f"y-dimension mismatch: {n_Y} vs {lay2.group('y').size}")
    n_X = lay1.group("x").size
    n_Z = lay2.group("z").size
    N1 = lay1.group("theta").size
    N2 = lay2.group("sigma").size
    layout = exprlang.VarLayout([
        exprlang.VarGroup("x", n_X, "base"),
        exprlang.VarGroup("z", n_Z, "base"),
        exprlang.VarGroup("y", n_Y, "fiber"),
        exprlang.VarGroup("theta", N1, "frequency"),
        exprlang.VarGroup("sigma", N2, "frequency"),
    ])
    expr = exprlang.add(k1.phase.expr, k2.phase.expr)

    p1, p2 = k1.phase.patch, k2.phase.patch
    x_box = p1.x_box[:n_X] + p2.x_box[n_Y:]
    y_box = tuple((max(a[0], b[0]), min(a[1], b[1]))
                  for a, b in zip(p1.x_box[n_X:], p2.x_box[:n_Y]))
    if any(lo >= hi for lo, hi in y_box):
        raise LayoutError("kernel patches do not overlap in y")
    d1 = np.asarray(p1.theta_direction)
    d2 = np.asarray(p2.theta_direction)
    direction = np.concatenate([d1, d2]) / math.sqrt(2.0)
    patch = ph.ConicPatch(
        x_box=x_box, theta_direction=tuple(direction),
        theta_angle=min(p1.theta_angle, p2.theta_angle),
        theta_radius=(min(p1.theta_radius[0], p2.theta_radius[0]),
                      max(p1.theta_radius[1], p2.theta_radius[1])),
        fiber_box=y_box)
    phi = ph.PhaseFunction(expr, layout, patch)
    validation = ph.validate_phase(phi, n_samples=validate_samples)
    if not validation.passed:
        raise DomainError(
            f"composed phase fails validation: {validation.failures}")
    weight = exprlang.pow_(
        exprlang.add(exprlang.pow_(exprlang.GroupNorm("theta"), exprlang.num(2)),
                     exprlang.pow_(exprlang.GroupNorm("sigma"), exprlang.num(2))),
        exprlang.num(-n_Y / 2))
    b = sy.Amplitude(
        exprlang.mul(exprlang.mul(k1.amplitude.expr, k2.amplitude.expr), weight),
        k1.amplitude.degree + k2.amplitude.degree - n_Y)
    return CompositionPlan(phi, b, k1, k2, k1.order, k2.order, n_Y, validation)


def intersection_excess(plan: CompositionPlan, seeds=None, n_random: int = 0,
                        seed: int = 0) -> ph.PhaseClassification:
    """Excess from the rank of the stationary differentials d(dPhi/domega),
    sampled at Newton-refined stationary points."""
    phi = plan.phi
    rng = np.random.default_rng(seed)
    cps: list[ph.CriticalPoint] = []
    seeds = list(seeds or [{}])
    for sd in seeds:
        cps.append(ph.find_critical(phi, **sd))
    for _ in range(n_random):
        x0 = np.array([rng.uniform(lo, hi) for lo, hi in phi.patch.x_box])
        fib = np.array([rng.uniform(lo, hi) for lo, hi in phi.patch.fiber_box])
        scale = rng.uniform(0.8, 1.25)
        # let the base variables move too: the stationary set projects onto
        # a proper subset of the (x, z) square, so a random seed generally
        # sits off it
        cp = ph.find_critical(phi, x_seed=x0, fiber_seed=fib,
                              theta_scale=scale, solve_vars=phi.var_names)
        cps.append(cp)
    cls = ph.classify(phi, cps)
    plan.classification = cls
    plan.stationary_points = cps
    return cls


def composed_order(m1: float, m2: float, e: int) -> float:
    """Order of the composed operator: m1 + m2 + e/2."""
    return m1 + m2 + e / 2


def excess_jacobian_diagnostic(plan: CompositionPlan,
                               cp: ph.CriticalPoint) -> dict:
    """Measure factor between d(y'', theta'', sigma'') and the omega''
    coordinates: excess y-directions pick up r = |(theta, sigma)|."""
    cls = plan.classification
    parts = plan.phi.split(cp.real_point())
    r = float(np.linalg.norm(parts["theta"].real))
    n_y_excess = sum(1 for nm in (cls.omega_dprime if cls else ())
                     if nm.startswith("y"))
    return {"radial_scale": r, "excess_y_directions": n_y_excess,
            "jacobian_omega_dprime": r ** n_y_excess}


def composed_symbol(plan: CompositionPlan, cp: ph.CriticalPoint,
                    fiber_box: dict[str, tuple[float, float]] | None = None,
                    lam: float = 1.0, **kw) -> sy.SymbolValue:
    """Principal symbol of the composition: the clean-variant formula on
    (Phi, a1 a2 (theta^2+sigma^2)^{-n_Y/2}); one code path for all e."""
    cls = plan.classification or intersection_excess(plan)
    psi = sy.make_psi(plan.phi, cp, lam=lam, classification=cls)
    val = sy.principal_symbol(plan.phi, plan.amplitude, cls, cp, psi,
                              fiber_box=fiber_box, **kw)
    val.provenance["order"] = composed_order(plan.m1, plan.m2, cls.excess)
    val.provenance["excess"] = cls.excess
    val.provenance.update(excess_jacobian_diagnostic(plan, cp))
    return val


# ---------------------------------------------------------------------------
# nested mollified-kernel oracle


@dataclass(frozen=True)
class Lattice:
    h: float
    i0: int
    n: int

    @classmethod
    def from_box(cls, lo: float, hi: float, h: float) -> "Lattice":
        i0 = math.floor(lo / h)
        n = math.ceil(hi / h) - i0 + 1
        return cls(h, i0, n)

    def points(self) -> np.ndarray:
        return (self.i0 + np.arange(self.n)) * self.h


def _taper(s, R: float):
    return plateau(s, R / 2, R)


def _freq_profile(kernel: OperatorKernel, R: float, dvals: np.ndarray,
                  nodes_per_rad: float = 4.0) -> np.ndarray:
    """kappa(d) = int e^{i d s} gamma(sigma) taper(|sigma|) dsigma, the
    one-variable profile of a difference kernel."""
    p = kernel.pattern
    freq_names = kernel.phase.freq_names
    k = freq_names.index(p.freq)
    others = [nm for nm in freq_names if nm != p.freq]
    dmax = float(np.max(np.abs(dvals))) if len(dvals) else 1.0
    n_s = max(256, int(math.ceil(nodes_per_rad * dmax * 2 * R / math.pi)))
    s_nodes, s_w = oracle.panel_rule(-R, R, n_s)
    if others:
        if len(others) > 1:
            raise BudgetError("difference fast path supports at most one "
                              "extra frequency axis")
        # no oscillation along the extra axis; moderate fixed budget
        o_nodes, o_w = oracle.panel_rule(-R, R, 512)
        W = np.empty(len(s_nodes), dtype=complex)
        step = max(1, int(2e6 // len(o_nodes)))
        for start in range(0, len(s_nodes), step):
            ss = s_nodes[start:start + step]
            env = {p.freq: np.repeat(ss, len(o_nodes)).astype(complex),
                   others[0]: np.tile(o_nodes, len(ss)).astype(complex)}
            rad = np.sqrt(env[p.freq].real**2 + env[others[0]].real**2)
            g = (np.asarray(exprlang.evaluate(p.freq_amp, env), dtype=complex)
                 if p.freq_amp is not None else np.ones(rad.size))
            block = (g * _taper(rad, R)).reshape(len(ss), len(o_nodes))
            W[start:start + step] = block @ o_w
    else:
        g = (np.asarray(exprlang.evaluate(
            p.freq_amp, {p.freq: s_nodes.astype(complex)}), dtype=complex)
            if p.freq_amp is not None else np.ones(len(s_nodes)))
        W = g * _taper(np.abs(s_nodes), R)
    W = W * s_w
    out = np.empty(len(dvals), dtype=complex)
    chunk = max(1, int(2e6 // max(len(s_nodes), 1)))
    for start in range(0, len(dvals), chunk):
        dd = dvals[start:start + chunk]
        out[start:start + chunk] = np.exp(1j * np.outer(dd, s_nodes)) @ W
    return out


def _conv_to(out_lat: Lattice, in_lat: Lattice, kappa, values: np.ndarray
             ) -> np.ndarray:
    """out[j] = sum_m kappa((out_j - in_m)) values[m]; exact lattice
    alignment, evaluated as a single discrete convolution."""
    pmin = out_lat.i0 - (in_lat.i0 + in_lat.n - 1)
    pmax = out_lat.i0 + out_lat.n - 1 - in_lat.i0
    dvals = np.arange(pmin, pmax + 1) * out_lat.h
    karr = kappa(dvals)
    if values.ndim == 1:
        full = scipy.signal.fftconvolve(values, karr)
        return full[in_lat.n - 1: in_lat.n - 1 + out_lat.n]
    full = scipy.signal.fftconvolve(values, karr[:, None], axes=0)
    return full[in_lat.n - 1: in_lat.n - 1 + out_lat.n, :]


def _eval_on(expr, names_values: dict) -> np.ndarray:
    if expr is None:
        shapes = [np.shape(v) for v in names_values.values()]
        return np.ones(shapes[0] if shapes else (), dtype=complex)
    return np.asarray(exprlang.evaluate(expr, names_values), dtype=complex)


@dataclass
class NestedOracleResult:
    value: complex
    h: float
    R: float
    grids: dict
    stability: float


def _nested_apply(plan: CompositionPlan, R: float, h: float,
                  fin, fout) -> complex:
    """<A1 A2 fin, fout> with mollified kernels on a shared lattice."""
    k1, k2 = plan.k1, plan.k2
    p1, p2 = k1.pattern, k2.pattern
    if p1 is None or p2 is None:
        raise BudgetError("nested oracle needs difference patterns on both "
                          "kernels (the generic tensor path would exceed "
                          "any sane budget)")
    if p1.col != p2.row:
        raise LayoutError("kernels must couple through the same y variable")
    phi = plan.phi
    if phi.n != 2:
        raise BudgetError("nested oracle fast path needs n_X = n_Z = 1")
    x_lat = Lattice.from_box(*phi.patch.x_box[0], h)
    z_lat = Lattice.from_box(*phi.patch.x_box[1], h)
    y_lat = Lattice.from_box(*phi.patch.fiber_box[0], h)
    extra = phi.patch.fiber_box[1:]
    if len(extra) > 1:
        raise BudgetError("nested oracle supports n_Y <= 2")

    z = z_lat.points()
    vin = np.asarray(fin(z), dtype=complex)
    vin = vin * _eval_on(p2.col_amp, {p2.col: z.astype(complex)}) * h

    # A2: convolution z -> y1, then broadcast over the extra y axis
    inner = _conv_to(y_lat, z_lat, lambda d: _freq_profile(k2, R, d), vin)
    y1 = y_lat.points()
    inner = inner * _eval_on(p2.row_amp, {p2.row: y1.astype(complex)})

    if extra:
        y2_lat = Lattice.from_box(*extra[0], h)
        y2 = y2_lat.points()
        env = {p1.col: y1[:, None].astype(complex)}
        other_name = [nm for nm in phi.fiber_names if nm != p1.col][0]
        env[other_name] = y2[None, :].astype(complex)
        col1 = _eval_on(p1.col_amp, env)
        col1 = np.broadcast_to(col1, (y_lat.n, y2_lat.n))
        mid = (col1 * inner[:, None]).sum(axis=1) * h
    else:
        mid = inner * _eval_on(p1.col_amp, {p1.col: y1.astype(complex)})

    outer = _conv_to(x_lat, y_lat, lambda d: _freq_profile(k1, R, d),
                     mid * h)
    x = x_lat.points()
    outer = outer * _eval_on(p1.row_amp, {p1.row: x.astype(complex)})
    wout = np.asarray(fout(x), dtype=complex)
    return complex(np.sum(wout * outer) * h)


def compose_kernels_oracle(plan: CompositionPlan, fin, fout, R: float,
                           bandwidth: float = 0.0, oversample: float = 3.0,
                           stability_tol: float = 1e-3) -> NestedOracleResult:
    """Numeric <A1 A2 f, g> with smooth radial mollification at |theta|=R.

    ``fin``/``fout`` map coordinate arrays to values (Bump instances
    work).  The lattice spacing follows the joint bandwidth R +
    ``bandwidth``; the result is accepted after a spacing refinement
    changes it by less than ``stability_tol`` (relative).
    """
    fin_fn = (lambda v: fin.values(v[:, None])) if isinstance(fin, Bump) else fin
    fout_fn = (lambda v: fout.values(v[:, None])) if isinstance(fout, Bump) else fout
    bw = R + bandwidth + 50.0
    h = math.pi / (oversample * bw)
    a = _nested_apply(plan, R, h, fin_fn, fout_fn)
    b = _nested_apply(plan, R, 0.75 * h, fin_fn, fout_fn)
    stab = abs(a - b) / max(abs(b), 1e-300)
    if stab > stability_tol:
        raise ConvergenceError(
            f"nested oracle not stable under lattice refinement "
            f"({stab:.2e} > {stability_tol:.0e})")
    return NestedOracleResult(b, 0.75 * h, R, {
        "x": phi_box_str(plan.phi.patch.x_box),
    }, stab)


def phi_box_str(box) -> str:
    return ";".join(f"{lo:g}..{hi:g}" for lo, hi in box)


@dataclass
class ComposedPairingReport:
    t_grid: tuple[float, ...]
    values: tuple[complex, ...]
    fit: oracle.OrderFit
    predicted_slope: float
    predicted_order: float


def pairing_decay(plan: CompositionPlan, cp: ph.CriticalPoint,
                  t_grid, lam: float = 1.0, R_factor: float = 4.0,
                  u_radius: tuple[float, float] = (0.18, 0.4),
                  stability_tol: float = 2e-3) -> ComposedPairingReport:
    """Decay order of <I(Phi, b), e^{-it psi} u> via the nested oracle.

    psi from the auxiliary construction is separable across (x, z), so
    the pairing is exactly <A1 A2 (e^{-it psi_z} u_z), e^{-it psi_x} u_x>
    with mollification R = R_factor t.  The fitted slope is compared to
    deg(b) + (N - n)/2 + e/2 = m1 + m2 + e/2 - n/4.
    """
    cls = plan.classification or intersection_excess(plan)
    psi = sy.make_psi(plan.phi, cp, lam=lam, classification=cls)
    phi = plan.phi
    if phi.n != 2:
        raise BudgetError("pairing decay fast path needs n_X = n_Z = 1")
    parts = phi.split(cp.real_point())
    x0 = parts["x"].real
    xi = psi.xi0
    ux = Bump(center=(float(x0[0]),), r_in=u_radius[0], r_out=u_radius[1])
    uz = Bump(center=(float(x0[1]),), r_in=u_radius[0], r_out=u_radius[1])

    def win_x(t):
        def fn(v):
            arg = -1j * t * (xi[0] * (v - x0[0]) - lam / 2 * (v - x0[0]) ** 2)
            return np.exp(arg) * ux.values(v[:, None])
        return fn

    def win_z(t):
        def fn(v):
            arg = -1j * t * (xi[1] * (v - x0[1]) - lam / 2 * (v - x0[1]) ** 2)
            return np.exp(arg) * uz.values(v[:, None])
        return fn

    slope_pred = (plan.amplitude.degree + (phi.N - phi.n) / 2
                  + cls.excess / 2)
    values = []
    for t in t_grid:
        R = R_factor * t
        bw = t * (float(np.max(np.abs(xi))) + lam * u_radius[1])
        res = compose_kernels_oracle(plan, win_z(t), win_x(t), R,
                                     bandwidth=bw,
                                     stability_tol=stability_tol)
        values.append(res.value)
    fit = oracle.fit_order([(t, abs(v)) for t, v in zip(t_grid, values)])
    return ComposedPairingReport(tuple(t_grid), tuple(values), fit,
                                 slope_pred,
                                 composed_order(plan.m1, plan.m2, cls.excess))
