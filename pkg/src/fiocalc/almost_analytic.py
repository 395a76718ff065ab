"""Almost analytic extensions of smooth functions of real variables.

The extension of ``f`` to complex arguments is the truncated Taylor rule

    f~(x + iy) = sum_{|alpha| <= K}  (d^alpha f(x) / alpha!) (iy)^alpha,

which restricts to ``f`` exactly on real points and has a d-bar
derivative of size O(|y|^K).  No cutoff in ``y`` is applied: every
evaluation here happens on small boxes where truncation alone provides
the needed flatness.  Derivatives of the extension are taken as the
order ``K - |beta|`` extension of ``d^beta f``, which is an equally
valid representative of the same equivalence class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import exprlang, jets
from .errors import LayoutError


def _alpha_factorial_ratio(alpha_plus_beta, alpha) -> float:
    # (alpha+beta)! / alpha!
    out = 1.0
    for ab, a in zip(alpha_plus_beta, alpha):
        out *= math.factorial(ab) / math.factorial(a)
    return out


@lru_cache(maxsize=None)
def _shift_arrays(d: int, order: int, ymax: int, beta: tuple[int, ...]):
    """Index arrays turning jet coefficients into extension derivatives:
    sources enumerate alpha with |alpha| <= ymax, targets point at
    alpha+beta, ratios carry (alpha+beta)!/alpha!."""
    idx = jets.indices(d, order)
    pos = jets.index_positions(d, order)
    sources, targets, ratios = [], [], []
    for i, alpha in enumerate(idx):
        if sum(alpha) > ymax:
            break
        ab = tuple(a + b for a, b in zip(alpha, beta))
        if sum(ab) > order:
            continue
        sources.append(i)
        targets.append(pos[ab])
        ratios.append(_alpha_factorial_ratio(ab, alpha))
    return (np.asarray(sources, dtype=np.int64),
            np.asarray(targets, dtype=np.int64),
            np.asarray(ratios, dtype=float))


class ExtensionPoint:
    """Jet of f at Re(z) specialized to the displacement iy = i Im(z)."""

    def __init__(self, ext: "AAExtension", point: np.ndarray, order: int):
        self.ext = ext
        self.point = point
        self.order = order
        self.iy = 1j * point.imag
        self.jet = jets.jet_of(ext.expr, ext.layout, point.real.astype(complex),
                               ext.names, order)
        self._pos = jets.index_positions(len(ext.names), order)
        self._mono: np.ndarray | None = None

    def _monomials(self) -> np.ndarray:
        if self._mono is None:
            d = len(self.ext.names)
            E = jets._exponent_matrix(d, self.order)
            powers = np.empty((d, self.order + 1), dtype=complex)
            powers[:, 0] = 1.0
            for k in range(1, self.order + 1):
                powers[:, k] = powers[:, k - 1] * self.iy
            mono = np.ones(E.shape[0], dtype=complex)
            for v in range(d):
                mono *= powers[v, E[:, v]]
            self._mono = mono
        return self._mono

    def value(self) -> complex:
        return self._deriv(tuple([0] * len(self.ext.names)), self.ext.K)

    def deriv(self, beta: tuple[int, ...]) -> complex:
        return self._deriv(beta, self.ext.K - sum(beta))

    def _deriv(self, beta, ymax: int) -> complex:
        d = len(self.ext.names)
        src, tgt, ratio = _shift_arrays(d, self.order, max(ymax, 0), tuple(beta))
        mono = self._monomials()
        return complex(np.sum(self.jet.coeffs[tgt] * ratio * mono[src]))


class AAExtension:
    """Almost analytic extension of an expression over its layout variables."""

    def __init__(self, expr: exprlang.Expr, layout: exprlang.VarLayout,
                 K: int = 8, freeze: dict[str, complex] | None = None):
        if freeze:
            expr = exprlang.substitute(expr, freeze)
        self.expr = expr
        self.layout = layout
        self.K = K
        self.names = [n for n in layout.names() if not freeze or n not in freeze]
        self._frozen = dict(freeze or {})

    def _point(self, point) -> np.ndarray:
        z = np.asarray(point, dtype=complex)
        if z.shape != (len(self.names),):
            raise LayoutError(
                f"extension point needs {len(self.names)} coordinates")
        return z

    def at(self, point, order: int | None = None) -> ExtensionPoint:
        return ExtensionPoint(self, self._point(point), order or self.K)

    def value(self, point) -> complex:
        return self.at(point).value()

    def deriv(self, point, names: list[str]) -> complex:
        """Mixed partial in the listed variables (with multiplicity)."""
        beta = [0] * len(self.names)
        for nm in names:
            beta[self.names.index(nm)] += 1
        return self.at(point).deriv(tuple(beta))

    def gradient(self, point, wrt: list[str] | None = None,
                 pt: ExtensionPoint | None = None) -> np.ndarray:
        wrt = wrt if wrt is not None else self.names
        pt = pt or self.at(self._point(point))
        out = np.empty(len(wrt), dtype=complex)
        for k, nm in enumerate(wrt):
            beta = tuple(1 if n == nm else 0 for n in self.names)
            out[k] = pt.deriv(beta)
        return out

    def hessian(self, point, rows: list[str] | None = None,
                cols: list[str] | None = None,
                pt: ExtensionPoint | None = None) -> np.ndarray:
        rows = rows if rows is not None else self.names
        cols = cols if cols is not None else rows
        pt = pt or self.at(self._point(point))
        out = np.empty((len(rows), len(cols)), dtype=complex)
        for a, ra in enumerate(rows):
            for b, cb in enumerate(cols):
                beta = [0] * len(self.names)
                beta[self.names.index(ra)] += 1
                beta[self.names.index(cb)] += 1
                out[a, b] = pt.deriv(tuple(beta))
        return out

    def dbar_components(self, point) -> np.ndarray:
        """Exact d-bar of the truncation rule, one value per variable.

        The O(1) parts of (d/dx_j + i d/dy_j) cancel analytically and
        only the top Taylor shell survives; summing that shell directly
        avoids the catastrophic cancellation a naive difference would hit
        at small |y|.
        """
        z = self._point(point)
        pt = ExtensionPoint(self, z, self.K + 1)
        d = len(self.names)
        out = np.empty(d, dtype=complex)
        iy = pt.iy
        for j in range(d):
            total = 0.0 + 0.0j
            for alpha in jets.indices(d, self.K):
                if sum(alpha) != self.K:
                    continue
                ab = tuple(a + (1 if v == j else 0) for v, a in enumerate(alpha))
                mono = 1.0 + 0.0j
                for v, a in enumerate(alpha):
                    if a:
                        mono *= iy[v] ** a
                total += (pt.jet.coeffs[pt._pos[ab]]
                          * _alpha_factorial_ratio(ab, alpha) * mono)
            out[j] = 0.5 * total
        return out


def extend(f: exprlang.Expr, layout: exprlang.VarLayout, K: int = 8,
           freeze: dict[str, complex] | None = None) -> AAExtension:
    """Almost analytic extension of ``f`` with the truncated Taylor rule."""
    return AAExtension(f, layout, K=K, freeze=freeze)


# ---------------------------------------------------------------------------
# d-bar flatness order


@dataclass
class DbarReport:
    exact: bool
    slope: float | None
    radii: tuple[float, ...]
    per_direction: list[dict]

    def passed(self, expected_order: float) -> bool:
        return self.exact or (self.slope is not None
                              and self.slope >= expected_order)


def dbar_order(ext: AAExtension, x, directions: int = 3,
               radii=None, seed: int = 0) -> DbarReport:
    """Least-squares slope of log |dbar f~| against log |y|.

    Polynomial extensions are analytic (identically zero d-bar) and are
    reported as ``exact`` rather than fitted.
    """
    x = np.asarray(x, dtype=float)
    radii = np.geomspace(1e-1, 1e-3, 7) if radii is None else np.asarray(radii)
    rng = np.random.default_rng(seed)
    d = len(ext.names)
    per_dir = []
    slopes = []
    all_exact = True
    for _ in range(directions):
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        mags = []
        for s in radii:
            comp = ext.dbar_components(x + 1j * s * u)
            mags.append(float(np.linalg.norm(comp)))
        mags = np.asarray(mags)
        if np.all(mags == 0.0):
            per_dir.append({"direction": u.tolist(), "exact": True})
            continue
        all_exact = False
        keep = mags > 0
        if np.count_nonzero(keep) < 4:
            per_dir.append({"direction": u.tolist(), "exact": False,
                            "slope": None, "note": "too few nonzero samples"})
            continue
        slope, intercept = np.polyfit(np.log(radii[keep]), np.log(mags[keep]), 1)
        slopes.append(float(slope))
        per_dir.append({"direction": u.tolist(), "exact": False,
                        "slope": float(slope), "intercept": float(intercept)})
    slope = min(slopes) if slopes else None
    return DbarReport(exact=all_exact, slope=slope,
                      radii=tuple(float(r) for r in radii), per_direction=per_dir)


# ---------------------------------------------------------------------------
# equivalence of graph manifolds


@dataclass(frozen=True)
class GraphManifold:
    """Manifold in graph form z'' = h(z') near the real domain.

    ``h`` components are extensions over the z' variables; the domain box
    bounds the real part of z'.
    """

    h: tuple[AAExtension, ...]
    box: tuple[tuple[float, float], ...]

    @property
    def dim_in(self) -> int:
        return len(self.box)

    @property
    def dim_out(self) -> int:
        return len(self.h)


@dataclass
class EquivalenceReport:
    equivalent: bool
    reason: str
    worst_ratio: float | None
    slope: float | None
    n_samples: int
    details: dict

    def __bool__(self) -> bool:  # convenience for assertions
        return self.equivalent


def manifolds_equivalent(m1: GraphManifold, m2: GraphManifold,
                         N_max: int = 4, n_samples: int = 120,
                         seed: int = 0) -> EquivalenceReport:
    """Sampled test of graph-manifold equivalence.

    Checks |h1 - h2| <= C |Im h2|^N at real sample points for each
    N <= N_max by fitting the growth of the ratio as the samples approach
    the real trace.  Sampled and fitted, not proven; diagnostics ride
    along in the report.
    """
    if m1.dim_in != m2.dim_in or m1.dim_out != m2.dim_out:
        raise LayoutError("incompatible splittings")
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in m1.box])
    hi = np.array([b[1] for b in m1.box])
    xs = rng.uniform(lo, hi, size=(n_samples, m1.dim_in))
    d_vals, m_vals, scale = [], [], 1.0
    for x in xs:
        h1 = np.array([h.value(x.astype(complex)) for h in m1.h])
        h2 = np.array([h.value(x.astype(complex)) for h in m2.h])
        d_vals.append(float(np.max(np.abs(h1 - h2))))
        m_vals.append(float(np.max(np.abs(h2.imag))))
        scale = max(scale, float(np.max(np.abs(h2))))
    d_vals = np.asarray(d_vals)
    m_vals = np.asarray(m_vals)

    on_trace = m_vals <= 1e-13 * scale
    if np.any(d_vals[on_trace] > 1e-10 * scale):
        worst = float(np.max(d_vals[on_trace]))
        return EquivalenceReport(False, "graphs differ on the real trace",
                                 None, None, n_samples,
                                 {"worst_on_trace": worst})
    if np.all(d_vals <= 1e-13 * scale):
        return EquivalenceReport(True, "graphs coincide at all samples",
                                 0.0, None, n_samples, {})

    off = (~on_trace) & (d_vals > 0)
    if np.count_nonzero(off) < 4:
        return EquivalenceReport(False, "not enough off-trace samples",
                                 None, None, n_samples, {})
    slope, intercept = np.polyfit(np.log(m_vals[off]), np.log(d_vals[off]), 1)
    worst = float(np.max(d_vals[off] / m_vals[off] ** N_max))
    ok = bool(slope >= N_max - 0.1)
    reason = ("difference vanishes to order >= N_max on approach"
              if ok else f"difference only O(|Im h2|^{slope:.2f})")
    return EquivalenceReport(ok, reason, worst, float(slope), n_samples,
                             {"intercept": float(intercept), "N_max": N_max})
