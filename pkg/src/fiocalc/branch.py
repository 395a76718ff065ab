"""Homotopy-continued inverse square roots of Hessian determinants.

For a complex Hessian H the matrix path

    A(s) = (1-s) (H / i) + s I,      s: 1 -> 0,

starts at the identity and ends at A = H/i.  The returned value is the
branch of det(A)^{-1/2} that deforms continuously into 1 along the
path.  The path determinant is tracked on an adaptively bisected grid;
as long as consecutive determinants differ in argument by less than
pi/2, the principal square root of each ratio is the continuous choice,
so the continuation is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, HomotopyError


@dataclass
class BranchedSqrt:
    matrix: np.ndarray                     # A(0) = H / i
    value: complex                         # r with r^2 det(A(0)) = 1
    path: tuple[tuple[float, complex], ...]  # (s, det A(s)), s decreasing
    subdivisions: int

    def verify(self, tol: float = 1e-10) -> float:
        """|r^2 det - 1|, which the construction keeps below tol."""
        return abs(self.value**2 * np.linalg.det(self.matrix) - 1.0)


def branched_inv_sqrt_det(H, initial_steps: int = 8,
                          det_floor: float = 1e-10,
                          max_nodes: int = 1 << 20) -> BranchedSqrt:
    """Branch of det((1/i) H)^{-1/2} continued from 1 along the homotopy.

    Raises HomotopyError when the path leaves GL (a determinant smaller
    than ``det_floor`` in modulus), which signals an invalid phase/psi
    pairing upstream.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("Hessian must be square")
    k = H.shape[0]
    A0 = H / 1j
    eye = np.eye(k)

    def det_at(s: float) -> complex:
        d = complex(np.linalg.det((1 - s) * A0 + s * eye))
        if abs(d) < det_floor:
            raise HomotopyError(
                f"homotopy leaves GL near s={s:.6f} (|det|={abs(d):.2e})")
        return d

    prev_s, prev_d = 1.0, det_at(1.0)
    value = 1.0 + 0.0j
    path = [(prev_s, prev_d)]
    # stack of pending (s, det) nodes, top = next node to try
    stack = [(s, det_at(s)) for s in np.linspace(0.0, 1.0, initial_steps + 1)[:-1]]
    subdivisions = 0
    nodes = len(stack) + 1
    while stack:
        s, d = stack[-1]
        ratio = d / prev_d
        if abs(np.angle(ratio)) < 0.5 * np.pi:
            value /= np.sqrt(ratio)
            prev_s, prev_d = s, d
            path.append((s, d))
            stack.pop()
        else:
            mid = 0.5 * (prev_s + s)
            stack.append((mid, det_at(mid)))
            subdivisions += 1
            nodes += 1
            if nodes > max_nodes:
                raise BudgetError(
                    "determinant homotopy winds faster than the node budget")
    result = BranchedSqrt(A0, value, tuple(path), subdivisions)
    err = result.verify()
    if err > 1e-10:
        raise HomotopyError(f"continuation self-check failed: |r^2 det - 1| = {err:.2e}")
    return result
