"""Damped Newton iteration for small complex systems.

Steps come from a least-squares solve, so overdetermined-but-consistent
and rank-deficient systems (clean phases) are handled the same way.  A
backtracking line search damps steps that do not reduce the residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, RankError


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    rank: int


def _rank(J: np.ndarray, threshold: float = 1e-8) -> int:
    s = np.linalg.svd(J, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s >= threshold * s[0]))


def damped_newton(fun, jac, x0, tol: float = 1e-12, max_iter: int = 50,
                  expected_rank: int | None = None) -> NewtonResult:
    """Solve fun(x) = 0 with Jacobian jac(x); x complex.

    ``expected_rank`` guards against rank collapse along the path: the
    Jacobian rank may not drop below it at any iterate.
    """
    x = np.asarray(x0, dtype=complex).copy()
    F = np.atleast_1d(np.asarray(fun(x), dtype=complex))
    rank = -1
    for it in range(max_iter):
        res = float(np.max(np.abs(F)))
        if res <= tol:
            return NewtonResult(x, res, it, rank)
        J = np.atleast_2d(np.asarray(jac(x), dtype=complex))
        rank = _rank(J)
        if expected_rank is not None and rank < expected_rank:
            raise RankError(
                f"Jacobian rank collapsed to {rank} (expected {expected_rank}) "
                f"at iterate {it}")
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        norm_f = float(np.linalg.norm(F))
        lam = 1.0
        while True:
            xn = x + lam * step
            Fn = np.atleast_1d(np.asarray(fun(xn), dtype=complex))
            if float(np.linalg.norm(Fn)) <= (1 - 0.25 * lam) * norm_f \
                    or float(np.max(np.abs(Fn))) <= tol:
                x, F = xn, Fn
                break
            lam *= 0.5
            if lam < 1e-7:
                raise ConvergenceError(
                    f"line search stalled at iterate {it}, residual {norm_f:.3e}")
    res = float(np.max(np.abs(F)))
    if res <= tol:
        return NewtonResult(x, res, max_iter, rank)
    raise ConvergenceError(
        f"no convergence in {max_iter} iterations, residual {res:.3e}")
