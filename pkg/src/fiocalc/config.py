"""Problem configuration: key-value text documents with sections.

Unknown sections and keys are rejected; every numeric quantity is
dimensionless.  Section semantics:

    [phase]       expression, layout and conic patch
    [amplitude]   homogeneous top-order amplitude
    [psi]         auxiliary concavity parameter
    [stationary]  stationary-phase problem (phase, cutoff, t-grid)
    [kernel1]     first operator kernel of a composition
    [kernel2]     second operator kernel
    [compose]     seeds, fiber box, order-fit options
    [oracle]      quadrature budgets and tolerances
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from . import compose as cm
from . import exprlang, oracle
from . import phase as ph
from . import stationary as st
from . import symbol as sy
from .bumps import Bump
from .errors import ConfigError, ParseError

_SECTION_KEYS = {
    "phase": {"expr", "layout", "x_box", "theta_direction", "theta_angle",
              "theta_radius", "fiber_box", "ext_order"},
    "amplitude": {"expr", "degree"},
    "psi": {"lambda"},
    "stationary": {"expr", "layout", "w", "k", "t_grid", "cutoff_center",
                   "cutoff_r_in", "cutoff_r_out", "cutoff_profile",
                   "cutoff_scale", "box_margin"},
    "kernel1": {"expr", "layout", "amplitude", "degree", "x_box",
                "theta_direction", "theta_angle", "theta_radius",
                "pattern_row", "pattern_col", "pattern_freq",
                "pattern_row_amp", "pattern_col_amp", "pattern_freq_amp"},
    "kernel2": set(),  # filled below, same as kernel1
    "compose": {"x_seed", "fiber_seed", "theta_scale", "n_random",
                "fiber_box", "lambda", "t_grid", "order_fit", "r_factor"},
    "oracle": {"expr", "layout", "amplitude", "box", "t", "t_grid",
               "osc_factor", "max_nodes_axis", "max_total_points",
               "rel_tol", "abs_tol", "damping_shrink"},
    "validate": {"criteria"},
}
_SECTION_KEYS["kernel2"] = _SECTION_KEYS["kernel1"]


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(p) for p in s.replace(";", ",").split(",") if p.strip())


def _range(s: str) -> tuple[float, float]:
    lo, _, hi = s.partition("..")
    try:
        return float(lo), float(hi)
    except ValueError as err:
        raise ConfigError(f"bad range {s!r}: {err}") from None


def _boxes(s: str) -> tuple[tuple[float, float], ...]:
    return tuple(_range(p) for p in s.split(";") if p.strip())


def _layout(s: str) -> exprlang.VarLayout:
    sizes = {}
    for part in s.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, size = part.partition(":")
        try:
            sizes[name.strip()] = int(size)
        except ValueError:
            raise ConfigError(f"bad layout entry {part!r}") from None
    return exprlang.VarLayout.make(**sizes)


def _expr(s: str) -> exprlang.Expr:
    return exprlang.parse(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {s!r}")


@dataclass
class ProblemConfig:
    text: str
    sections: dict[str, dict[str, str]]

    @classmethod
    def loads(cls, text: str) -> "ProblemConfig":
        parser = configparser.ConfigParser(interpolation=None, strict=True,
                                           delimiters=("=",),
                                           comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as err:
            raise ConfigError(f"malformed config: {err}") from None
        sections: dict[str, dict[str, str]] = {}
        for name in parser.sections():
            if name not in _SECTION_KEYS:
                raise ConfigError(f"unknown section [{name}]")
            body = dict(parser.items(name))
            unknown = set(body) - _SECTION_KEYS[name]
            if unknown:
                raise ConfigError(
                    f"unknown keys in [{name}]: {sorted(unknown)}")
            sections[name] = body
        return cls(text, sections)

    def has(self, section: str) -> bool:
        return section in self.sections

    def need(self, section: str) -> dict[str, str]:
        if section not in self.sections:
            raise ConfigError(f"missing [{section}] section")
        return self.sections[section]

    def get(self, section: str, key: str, default: str | None = None) -> str:
        body = self.need(section)
        if key not in body:
            if default is None:
                raise ConfigError(f"missing key {key!r} in [{section}]")
            return default
        return body[key]

    # -- builders ------------------------------------------------------------

    def phase(self) -> ph.PhaseFunction:
        sec = "phase"
        layout = _layout(self.get(sec, "layout"))
        patch = ph.ConicPatch(
            x_box=_boxes(self.get(sec, "x_box")),
            theta_direction=_floats(self.get(sec, "theta_direction")),
            theta_angle=float(self.get(sec, "theta_angle", "0.2")),
            theta_radius=_range(self.get(sec, "theta_radius", "0.5..2.0")),
            fiber_box=_boxes(self.get(sec, "fiber_box", "")) or (),
        )
        return ph.PhaseFunction(_expr(self.get(sec, "expr")), layout, patch,
                                ext_order=int(self.get(sec, "ext_order", "6")))

    def amplitude(self) -> sy.Amplitude:
        return sy.Amplitude(_expr(self.get("amplitude", "expr")),
                            float(self.get("amplitude", "degree")))

    def psi_lambda(self) -> float:
        if not self.has("psi"):
            return 1.0
        return float(self.get("psi", "lambda", "1.0"))

    def cutoff(self) -> Bump:
        sec = "stationary"
        return Bump(center=_floats(self.get(sec, "cutoff_center")),
                    r_in=float(self.get(sec, "cutoff_r_in", "2.0")),
                    r_out=float(self.get(sec, "cutoff_r_out", "4.0")),
                    profile=self.get(sec, "cutoff_profile", "plateau"),
                    scale=float(self.get(sec, "cutoff_scale", "0")))

    def stationary_problem(self) -> st.SPProblem:
        sec = "stationary"
        layout = _layout(self.get(sec, "layout"))
        t_grid = _floats(self.get(sec, "t_grid", "")) or st.DEFAULT_T_GRID
        return st.SPProblem(_expr(self.get(sec, "expr")), layout,
                            self.cutoff(), K=int(self.get(sec, "k", "8")),
                            t_grid=t_grid,
                            box_margin=float(self.get(sec, "box_margin",
                                                      "1.05")))

    def stationary_w(self) -> tuple[float, ...]:
        return _floats(self.get("stationary", "w", "")) or ()

    def kernel(self, which: str) -> cm.OperatorKernel:
        sec = which
        layout = _layout(self.get(sec, "layout"))
        patch = ph.ConicPatch(
            x_box=_boxes(self.get(sec, "x_box")),
            theta_direction=_floats(self.get(sec, "theta_direction")),
            theta_angle=float(self.get(sec, "theta_angle", "0.2")),
            theta_radius=_range(self.get(sec, "theta_radius", "0.5..2.0")))
        pattern = None
        if "pattern_row" in self.sections[sec]:
            def opt_expr(key):
                src = self.get(sec, key, "")
                return _expr(src) if src else None
            pattern = cm.DifferencePattern(
                row=self.get(sec, "pattern_row"),
                col=self.get(sec, "pattern_col"),
                freq=self.get(sec, "pattern_freq"),
                row_amp=opt_expr("pattern_row_amp"),
                col_amp=opt_expr("pattern_col_amp"),
                freq_amp=opt_expr("pattern_freq_amp"))
        phi = ph.PhaseFunction(_expr(self.get(sec, "expr")), layout, patch)
        amp = sy.Amplitude(_expr(self.get(sec, "amplitude")),
                           float(self.get(sec, "degree")))
        return cm.OperatorKernel(phi, amp, pattern)

    def compose_options(self) -> dict:
        sec = "compose"
        body = self.sections.get(sec, {})
        fiber_box = None
        if body.get("fiber_box"):
            fiber_box = {}
            for part in body["fiber_box"].split(";"):
                part = part.strip()
                if not part:
                    continue
                name, _, rng = part.partition(":")
                fiber_box[name.strip()] = _range(rng)
        return {
            "x_seed": _floats(body["x_seed"]) if body.get("x_seed") else None,
            "fiber_seed": (_floats(body["fiber_seed"])
                           if body.get("fiber_seed") else None),
            "theta_scale": float(body.get("theta_scale", "1.0")),
            "n_random": int(body.get("n_random", "3")),
            "fiber_box": fiber_box,
            "lambda": float(body.get("lambda", "1.0")),
            "t_grid": _floats(body.get("t_grid", "")) or None,
            "order_fit": _bool(body.get("order_fit", "false")),
            "r_factor": float(body.get("r_factor", "4.0")),
        }

    def oracle_spec(self, default_box=None) -> oracle.QuadratureSpec:
        body = self.sections.get("oracle", {})
        box = _boxes(body["box"]) if body.get("box") else default_box
        if box is None:
            raise ConfigError("oracle spec needs a box")
        return oracle.QuadratureSpec(
            box=box,
            osc_factor=float(body.get("osc_factor", "4.0")),
            max_nodes_axis=int(body.get("max_nodes_axis", "200000")),
            max_total_points=float(body.get("max_total_points", "2e8")),
            rel_tol=float(body.get("rel_tol", "1e-12")),
            abs_tol=float(body.get("abs_tol", "1e-15")),
            damping_shrink=_bool(body.get("damping_shrink", "true")),
        )


def load_text(text: str) -> ProblemConfig:
    try:
        return ProblemConfig.loads(text)
    except ParseError as err:
        raise ConfigError(f"expression error: {err}") from None
