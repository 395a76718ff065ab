"""Smooth compactly supported cutoff profiles.

The basic building block is ``f(r) = exp(-1/r)`` glued into a plateau
function: identically 1 below ``lo``, identically 0 above ``hi``, smooth
in between.  ``profile`` is the fixed shape used by the ``bump()``
expression call (lo=1/2, hi=1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

PROFILE_LO = 0.5
PROFILE_HI = 1.0


def _f(r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 1e-12
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def plateau(s, lo: float, hi: float):
    """Radial plateau: 1 for s <= lo, 0 for s >= hi, smooth between."""
    if not lo < hi:
        raise DomainError(f"plateau needs lo < hi, got {lo}, {hi}")
    s = np.asarray(s, dtype=float)
    up = _f(hi - s)
    down = _f(s - lo)
    mid = up / np.where(up + down > 0, up + down, 1.0)
    out = np.where(s <= lo, 1.0, np.where(s >= hi, 0.0, mid))
    return out if out.shape else float(out)


def profile(v):
    """Fixed bump profile of the expression language: plateau of ``|v|``."""
    a = np.abs(np.asarray(v))
    return plateau(a, PROFILE_LO, PROFILE_HI)


def _plateau_jet(s, lo: float, hi: float):
    # s is a jet whose constant term lies strictly inside (lo, hi)
    up = (-(1.0 / (hi - s))).exp()
    down = (-(1.0 / (s - lo))).exp()
    return up / (up + down)


def profile_jet(v):
    """Jet of the ``bump()`` profile; argument constant term must be real."""
    from .jets import Jet

    c0 = v.coeffs[0]
    if abs(c0.imag) > 1e-9 * (1 + abs(c0)):
        raise DomainError("bump() of a jet with non-real base value")
    a0 = abs(c0.real)
    margin = 1e-9
    if a0 <= PROFILE_LO - margin:
        return Jet.constant(1.0, v.d, v.K)
    if a0 >= PROFILE_HI - margin:
        return Jet.constant(0.0, v.d, v.K)
    if a0 <= PROFILE_LO + margin or v.K == 0:
        return Jet.constant(float(profile(a0)), v.d, v.K)
    s = (v * v).sqrt()  # |v|, smooth since the base value is nonzero
    return _plateau_jet(s, PROFILE_LO, PROFILE_HI)


@dataclass(frozen=True)
class Bump:
    """Smooth cutoff with center/radius parameters.

    ``plateau`` profile: identically 1 for ``|x-center| <= r_in``, 0
    outside ``r_out``.  ``gauss`` profile multiplies the same plateau by a
    Gaussian of width ``scale`` so derivatives at the center do not all
    vanish (needed when a remainder fit wants a nonzero first correction).
    ``zero_at_center_power`` multiplies by ``(x1-c1)**p`` to make cutoffs
    vanishing at the center.
    """

    center: tuple[float, ...]
    r_in: float
    r_out: float
    profile: str = "plateau"
    scale: float = 0.0
    zero_at_center_power: int = field(default=0)

    def __post_init__(self):
        if not 0 < self.r_in < self.r_out:
            raise DomainError("bump needs 0 < r_in < r_out")
        if self.profile not in ("plateau", "gauss"):
            raise DomainError(f"unknown bump profile {self.profile!r}")
        if self.profile == "gauss" and self.scale <= 0:
            object.__setattr__(self, "scale", self.r_in)

    @property
    def dim(self) -> int:
        return len(self.center)

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized values at real points; ``xs`` has shape (..., dim)."""
        xs = np.asarray(xs, dtype=float)
        d = xs - np.asarray(self.center)
        s = np.sqrt(np.sum(d * d, axis=-1))
        out = plateau(s, self.r_in, self.r_out)
        if self.profile == "gauss":
            out = out * np.exp(-s * s / (2 * self.scale**2))
        if self.zero_at_center_power:
            out = out * d[..., 0] ** self.zero_at_center_power
        return out

    def value(self, x) -> float:
        return float(self.values(np.asarray(x, dtype=float)))

    def jet(self, base, K: int):
        """Jet at a real base point, in the bump's own variables."""
        from .jets import Jet

        base = np.asarray(base, dtype=float)
        d = self.dim
        s0 = float(np.linalg.norm(base - np.asarray(self.center)))
        margin = 1e-9
        vs = [Jet.variable(complex(base[i]), i, d, K) for i in range(d)]
        diffs = [v - c for v, c in zip(vs, self.center)]

        def finish(core):
            if self.profile == "gauss":
                q = sum(di * di for di in diffs)
                core = core * (q * (-1.0 / (2 * self.scale**2))).exp()
            if self.zero_at_center_power:
                core = core * diffs[0] ** self.zero_at_center_power
            return core

        if s0 >= self.r_out - margin:
            return Jet.constant(0.0, d, K)
        if s0 <= self.r_in - margin:
            return finish(Jet.constant(1.0, d, K))
        if K == 0 or s0 <= self.r_in + margin:
            val = float(plateau(s0, self.r_in, self.r_out))
            return finish(Jet.constant(val, d, K))
        s = sum(di * di for di in diffs).sqrt()
        return finish(_plateau_jet(s, self.r_in, self.r_out))

    def ext_value(self, z, K: int = 8) -> complex:
        """Almost analytic extension value: Taylor rule around Re(z)."""
        z = np.asarray(z, dtype=complex)
        j = self.jet(z.real, K)
        return j.eval_shift(1j * z.imag)
