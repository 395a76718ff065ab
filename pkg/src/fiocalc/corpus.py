"""Shipped example kernels and phases used across tests, the validation
suite and the documentation.

Kernel amplitudes carry the 1/(2 pi) per frequency variable that makes
the delta-type kernels unit-normalized, so composing the two
pseudodifferential factors reproduces the identity pairing exactly in
the large-mollification limit.
"""

from __future__ import annotations

import math

import numpy as np

from . import compose, exprlang
from . import phase as ph
from .symbol import Amplitude

INV_2PI = 1.0 / (2.0 * math.pi)


def _const(v: float) -> exprlang.Expr:
    return exprlang.num(v)


def pseudodiff_kernel(base: str, out: str, freq: str,
                      half: float = 0.8) -> compose.OperatorKernel:
    """Unit pseudodifferential factor with kernel (2pi)^-1 e^{i(out-in)theta}."""
    sizes = {out: 1, base: 1, freq: 1}
    layout = exprlang.VarLayout.make(**sizes)
    patch = ph.ConicPatch(x_box=((-half, half), (-half, half)),
                          theta_direction=(1.0,), theta_angle=0.2,
                          theta_radius=(0.5, 2.0))
    phase_src = f"({out}1-{base}1)*{freq}1"
    pattern = compose.DifferencePattern(
        row=f"{out}1", col=f"{base}1", freq=f"{freq}1",
        freq_amp=_const(INV_2PI))
    return compose.make_kernel(phase_src, repr(INV_2PI), 0.0, layout, patch,
                               pattern)


def pseudodiff_pair() -> compose.CompositionPlan:
    """Identity-like composition: e = 0, m1 = m2 = 0."""
    k1 = pseudodiff_kernel("y", "x", "theta")
    k2 = pseudodiff_kernel("z", "y", "sigma")
    return compose.build_composed_phase(k1, k2)


def pushforward_pullback_pair(chi_width: float = 0.6,
                              half: float = 0.8) -> compose.CompositionPlan:
    """Pushforward after pullback along R^2 -> R: excess e = 1.

    Kernels (2pi)^-1 delta(x - y1) chi(y2) and (2pi)^-1 delta(y1 - z),
    with chi a fixed bump of the given width; the composition is
    (int chi) times the identity.
    """
    chi = exprlang.mul(exprlang.Call("bump", exprlang.div(
        exprlang.var("y2"), exprlang.num(chi_width))), _const(INV_2PI))
    lay1 = exprlang.VarLayout.make(x=1, y=2, theta=1)
    patch1 = ph.ConicPatch(
        x_box=((-half, half), (-half, half), (-1.0, 1.0)),
        theta_direction=(1.0,), theta_angle=0.2, theta_radius=(0.5, 2.0))
    k1 = compose.OperatorKernel(
        ph.PhaseFunction(exprlang.parse("(x1-y1)*theta1"), lay1, patch1),
        Amplitude(chi, 0.0),
        compose.DifferencePattern(row="x1", col="y1", freq="theta1",
                                  col_amp=chi))
    lay2 = exprlang.VarLayout.make(y=2, z=1, sigma=1)
    patch2 = ph.ConicPatch(
        x_box=((-half, half), (-1.0, 1.0), (-half, half)),
        theta_direction=(1.0,), theta_angle=0.2, theta_radius=(0.5, 2.0))
    k2 = compose.OperatorKernel(
        ph.PhaseFunction(exprlang.parse("(y1-z1)*sigma1"), lay2, patch2),
        Amplitude(_const(INV_2PI), 0.0),
        compose.DifferencePattern(row="y1", col="z1", freq="sigma1",
                                  freq_amp=_const(INV_2PI)))
    return compose.build_composed_phase(k1, k2)


def dummy_frequency_pair(half: float = 0.8) -> compose.CompositionPlan:
    """Second factor carries a frequency variable its phase ignores:
    excess e = 1 through the duplicated-frequency mechanism."""
    k1 = pseudodiff_kernel("y", "x", "theta", half=half)
    lay2 = exprlang.VarLayout.make(y=1, z=1, sigma=2)
    patch2 = ph.ConicPatch(
        x_box=((-half, half), (-half, half)),
        theta_direction=(1.0, 0.0), theta_angle=0.45,
        theta_radius=(0.5, 2.0))
    gamma = exprlang.mul(exprlang.Call("bump", exprlang.div(
        exprlang.var("sigma2"), exprlang.var("sigma1"))), _const(INV_2PI))
    k2 = compose.OperatorKernel(
        ph.PhaseFunction(exprlang.parse("(y1-z1)*sigma1"), lay2, patch2),
        Amplitude(gamma, 0.0),
        compose.DifferencePattern(row="y1", col="z1", freq="sigma1",
                                  freq_amp=gamma))
    return compose.build_composed_phase(k1, k2)


def profile_integral() -> float:
    """int of the bump() profile over the line, by fine quadrature."""
    from . import bumps, oracle
    x, w = oracle.panel_rule(-1.0, 1.0, 4000)
    return float(np.sum(bumps.profile(x) * w))
