"""Brute-force oscillatory integral evaluation and order fitting.

This module is the ground truth the asymptotic machinery is checked
against, so it deliberately knows nothing about stationary phase: plain
tensor Gauss-Legendre with oscillation-aware node budgets, node-doubling
acceptance, and log-log order fits.  Large node counts use composite
panels of a fixed 32-point rule, which keeps the Gauss exactness per
panel while the panel count tracks the oscillation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import exprlang
from .bumps import Bump
from .errors import BudgetError, ConvergenceError

_PANEL_ORDER = 32
_DAMPING_LOG = 45.0  # exp(-45) ~ 3e-20, below any tolerance used here


@lru_cache(maxsize=None)
def gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]; exact for polynomials of degree 2q-1."""
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def panel_rule(lo: float, hi: float, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule with ~n_nodes points on [lo, hi]."""
    if n_nodes <= 4 * _PANEL_ORDER:
        q = max(2, int(n_nodes))
        x, w = gauss_legendre(q)
        mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
        return mid + half * x, half * w
    panels = math.ceil(n_nodes / _PANEL_ORDER)
    edges = np.linspace(lo, hi, panels + 1)
    x, w = gauss_legendre(_PANEL_ORDER)
    mids = 0.5 * (edges[1:] + edges[:-1])
    halfs = 0.5 * (edges[1:] - edges[:-1])
    xs = (mids[:, None] + halfs[:, None] * x[None, :]).ravel()
    ws = (halfs[:, None] * w[None, :]).ravel()
    return xs, ws


@dataclass
class QuadratureSpec:
    """Tensor quadrature over a box with oscillation-aware budgets."""

    box: tuple[tuple[float, float], ...]
    osc_factor: float = 4.0
    base_nodes: tuple[int, ...] | None = None
    min_nodes: int = 24
    max_nodes_axis: int = 200_000
    max_total_points: float = 2e8
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_doublings: int = 8
    damping_shrink: bool = True
    chunk: int = 1 << 21

    def nodes_for(self, t: float, box=None) -> list[int]:
        # half the oscillation budget: the first doubling lands on the
        # nominal osc_factor * t * length, where acceptance is expected
        box = box if box is not None else self.box
        if self.base_nodes is not None:
            return [max(self.min_nodes, n) for n in self.base_nodes]
        out = []
        for lo, hi in box:
            n = int(math.ceil(0.5 * self.osc_factor * max(t, 1.0) * (hi - lo)))
            out.append(min(self.max_nodes_axis, max(self.min_nodes, n)))
        return out


@dataclass
class OscIntegralReport:
    value: complex
    nodes: tuple[int, ...]
    box: tuple[tuple[float, float], ...]
    last_delta: float
    doublings: int
    evaluations: int
    diagnostics: dict = field(default_factory=dict)


def _as_grid_fn(obj, layout: exprlang.VarLayout | None,
                frozen: dict | None) -> Callable:
    """Normalize Expr / Bump / callable / None into a grid function."""
    if obj is None:
        return lambda coords: np.ones_like(coords[0])
    if isinstance(obj, Bump):
        return lambda coords: obj.values(np.stack([c.real for c in coords],
                                                  axis=-1)).astype(complex)
    if callable(obj) and not isinstance(obj, exprlang.Expr):
        return obj
    if layout is None:
        raise ValueError("expression integrands need a layout")
    names = [n for n in layout.names() if not frozen or n not in frozen]

    def fn(coords):
        env = dict(zip(names, coords))
        if frozen:
            env.update(frozen)
        return np.asarray(exprlang.evaluate(obj, env), dtype=complex)

    return fn


def _shrink_box(phase_fn, t: float, box) -> tuple[tuple[float, float], ...]:
    """Clip axes where the damping e^{-t Im F} is below 1e-18 everywhere."""
    axes = [np.linspace(lo, hi, 33) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.asarray(phase_fn([m.astype(complex).ravel() for m in mesh]))
    vals = np.broadcast_to(vals, (mesh[0].size,))
    keep = (t * vals.imag.reshape(mesh[0].shape)) <= _DAMPING_LOG
    if not np.any(keep) or np.all(keep):
        return tuple(box)
    out = []
    for ax in range(len(box)):
        other = tuple(i for i in range(len(box)) if i != ax)
        line = keep.any(axis=other) if other else keep
        idx = np.nonzero(line)[0]
        lo_i, hi_i = max(0, idx[0] - 1), min(32, idx[-1] + 1)
        out.append((float(axes[ax][lo_i]), float(axes[ax][hi_i])))
    return tuple(out)


def _tensor_value(phase_fn, amp_fn, t, rules, chunk) -> tuple[complex, int]:
    dims = len(rules)
    xs = [r[0] for r in rules]
    ws = [r[1] for r in rules]
    sizes = [len(x) for x in xs]
    total = int(np.prod(sizes))
    rest = total // sizes[0] if dims > 1 else 1
    step = max(1, chunk // max(rest, 1))
    acc = 0.0 + 0.0j
    evals = 0
    for start in range(0, sizes[0], step):
        sl = slice(start, start + step)
        axes = [xs[0][sl]] + xs[1:]
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = [m.astype(complex).ravel() for m in mesh]
        f = np.asarray(phase_fn(coords), dtype=complex)
        a = np.asarray(amp_fn(coords), dtype=complex)
        wmesh = np.meshgrid(*([ws[0][sl]] + ws[1:]), indexing="ij")
        wtot = np.ones_like(wmesh[0])
        for wm in wmesh:
            wtot = wtot * wm
        integrand = np.exp(1j * t * f) * np.broadcast_to(a, f.shape)
        acc += complex(np.sum(integrand * wtot.ravel()))
        evals += f.size
    return acc, evals


def osc_integral_report(F, u, t: float, spec: QuadratureSpec,
                        layout: exprlang.VarLayout | None = None,
                        frozen: dict | None = None) -> OscIntegralReport:
    """Evaluate the oscillatory integral of exp(itF) u over the spec box.

    Parameters
    ----------
    F, u : Expr, Bump, callable or None
        Phase and amplitude.  Callables receive a list of complex
        coordinate arrays (one per axis) and return an array.
    t : float
        Large parameter; drives the per-axis node budget.
    spec : QuadratureSpec
        Box, budgets and acceptance tolerances.

    The value is accepted only once one node doubling changes it by at
    most the declared tolerance; otherwise a BudgetError is raised.
    """
    phase_fn = _as_grid_fn(F, layout, frozen)
    amp_fn = _as_grid_fn(u, layout, frozen)
    box = tuple(spec.box)
    if spec.damping_shrink:
        box = _shrink_box(phase_fn, t, box)
    nodes = spec.nodes_for(t, box)
    prev = None
    evals = 0
    for doubling in range(spec.max_doublings + 1):
        if float(np.prod([float(n) for n in nodes])) > spec.max_total_points:
            raise BudgetError(
                f"grid of {nodes} nodes exceeds the {spec.max_total_points:.0e} "
                f"point budget before reaching stability")
        rules = [panel_rule(lo, hi, n) for (lo, hi), n in zip(box, nodes)]
        value, ev = _tensor_value(phase_fn, amp_fn, t, rules, spec.chunk)
        evals += ev
        if prev is not None:
            delta = abs(value - prev)
            if delta <= max(spec.rel_tol * abs(value), spec.abs_tol):
                return OscIntegralReport(value, tuple(nodes), box, delta,
                                         doubling, evals)
        prev = value
        if any(n >= spec.max_nodes_axis for n in nodes) \
                and doubling < spec.max_doublings:
            raise BudgetError(
                f"per-axis cap {spec.max_nodes_axis} hit before stability")
        nodes = [min(spec.max_nodes_axis, 2 * n) for n in nodes]
    raise BudgetError(
        f"no node-doubling stability after {spec.max_doublings} doublings")


def osc_integral(F, u, t: float, spec: QuadratureSpec,
                 layout: exprlang.VarLayout | None = None,
                 frozen: dict | None = None) -> complex:
    return osc_integral_report(F, u, t, spec, layout, frozen).value


# ---------------------------------------------------------------------------
# order fitting


@dataclass
class OrderFit:
    slope: float
    intercept: float
    residual: float
    n_used: int
    dropped: tuple[float, ...]
    samples: tuple[tuple[float, float], ...]


def fit_order(samples: Sequence[tuple[float, float]],
              floor: float = 1e-16) -> OrderFit:
    """Least-squares line through (log t, log err); errors at the noise
    floor are dropped and reported."""
    kept, dropped = [], []
    for t, err in samples:
        if err > floor:
            kept.append((float(t), float(err)))
        else:
            dropped.append(float(t))
    if len({t for t, _ in kept}) != len(kept):
        raise ConvergenceError("order fit needs distinct t samples")
    if len(kept) < 4:
        raise ConvergenceError(
            f"order fit needs at least 4 usable samples, got {len(kept)}")
    lt = np.log([t for t, _ in kept])
    le = np.log([e for _, e in kept])
    slope, intercept = np.polyfit(lt, le, 1)
    resid = float(np.sqrt(np.mean((le - (slope * lt + intercept)) ** 2)))
    return OrderFit(float(slope), float(intercept), resid, len(kept),
                    tuple(dropped), tuple((t, e) for t, e in kept))
