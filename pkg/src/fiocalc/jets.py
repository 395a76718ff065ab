"""Truncated multivariate Taylor (jet) arithmetic.

A :class:`Jet` stores the coefficients ``c_alpha = d^alpha f / alpha!``
of a function at a base point, for all multi-indices ``|alpha| <= K`` in
``d`` active variables, in graded-lexicographic order.  Arithmetic is
exact on polynomials of total degree ``<= K``; transcendental calls use
the usual series composition.  Dimensions stay tiny here (d <= ~8), so
dense coefficient tables win on simplicity.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import bumps, exprlang
from .errors import DomainError


@lru_cache(maxsize=None)
def indices(d: int, K: int) -> tuple[tuple[int, ...], ...]:
    """Multi-indices with |alpha| <= K, graded-lexicographic."""
    out: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for a in range(remaining + 1):
            rec(prefix + (a,), remaining - a, slots - 1)

    alls: list[tuple[int, ...]] = []
    for deg in range(K + 1):
        out = []
        rec((), deg, d)
        alls.extend(sorted(out))
    return tuple(alls)


@lru_cache(maxsize=None)
def index_positions(d: int, K: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(indices(d, K))}


@lru_cache(maxsize=None)
def _mul_table(d: int, K: int):
    idx = indices(d, K)
    pos = index_positions(d, K)
    ii, jj, kk = [], [], []
    for i, a in enumerate(idx):
        da = sum(a)
        for j, b in enumerate(idx):
            if da + sum(b) > K:
                continue
            ii.append(i)
            jj.append(j)
            kk.append(pos[tuple(x + y for x, y in zip(a, b))])
    return (np.asarray(ii, dtype=np.int64),
            np.asarray(jj, dtype=np.int64),
            np.asarray(kk, dtype=np.int64))


@lru_cache(maxsize=None)
def _exponent_matrix(d: int, K: int) -> np.ndarray:
    return np.asarray(indices(d, K), dtype=np.int64)


class Jet:
    __slots__ = ("d", "K", "coeffs")

    def __init__(self, d: int, K: int, coeffs: np.ndarray):
        self.d = d
        self.K = K
        self.coeffs = coeffs

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, value, d: int, K: int) -> "Jet":
        c = np.zeros(len(indices(d, K)), dtype=complex)
        c[0] = complex(value)
        return cls(d, K, c)

    @classmethod
    def variable(cls, value, slot: int, d: int, K: int) -> "Jet":
        j = cls.constant(value, d, K)
        if K >= 1:
            e = tuple(1 if i == slot else 0 for i in range(d))
            j.coeffs[index_positions(d, K)[e]] = 1.0
        return j

    def copy(self) -> "Jet":
        return Jet(self.d, self.K, self.coeffs.copy())

    @property
    def value(self) -> complex:
        return complex(self.coeffs[0])

    def coefficient(self, alpha: tuple[int, ...]) -> complex:
        return complex(self.coeffs[index_positions(self.d, self.K)[alpha]])

    def derivative(self, alpha: tuple[int, ...]) -> complex:
        """d^alpha f at the base point (coefficient times alpha!)."""
        fact = 1
        for a in alpha:
            fact *= math.factorial(a)
        return self.coefficient(alpha) * fact

    # -- ring operations ---------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if (other.d, other.K) != (self.d, self.K):
                raise DomainError("jet shape mismatch")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return Jet(self.d, self.K, self.coeffs + o.coeffs)
        c = self.coeffs.copy()
        c[0] += complex(other)
        return Jet(self.d, self.K, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.d, self.K, -self.coeffs)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -complex(other))

    def __rsub__(self, other):
        return (-self) + complex(other)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return Jet(self.d, self.K, self.coeffs * complex(other))
        ii, jj, kk = _mul_table(self.d, self.K)
        prod = self.coeffs[ii] * o.coeffs[jj]
        n = len(self.coeffs)
        out = (np.bincount(kk, weights=prod.real, minlength=n)
               + 1j * np.bincount(kk, weights=prod.imag, minlength=n))
        return Jet(self.d, self.K, out)

    __rmul__ = __mul__

    def inverse(self) -> "Jet":
        c0 = self.value
        if c0 == 0:
            raise DomainError("division by a jet with zero value")
        series = np.array([(-1) ** k / c0 ** (k + 1) for k in range(self.K + 1)],
                          dtype=complex)
        return self._compose(series)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            if complex(other) == 0:
                raise DomainError("division by zero")
            return Jet(self.d, self.K, self.coeffs / complex(other))
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * complex(other)

    def __pow__(self, p):
        if isinstance(p, Jet):
            if np.all(p.coeffs[1:] == 0):
                return self.__pow__(p.value)
            return (p * self.log()).exp()
        pc = complex(p)
        if pc.imag == 0 and float(pc.real).is_integer():
            n = int(pc.real)
            if n == 0:
                return Jet.constant(1.0, self.d, self.K)
            base = self if n > 0 else self.inverse()
            n = abs(n)
            result = Jet.constant(1.0, self.d, self.K)
            acc = base
            while n:
                if n & 1:
                    result = result * acc
                n >>= 1
                if n:
                    acc = acc * acc
            return result
        c0 = self.value
        if c0 == 0:
            raise DomainError("fractional power of a jet with zero value")
        series = np.empty(self.K + 1, dtype=complex)
        series[0] = c0 ** pc
        for k in range(1, self.K + 1):
            series[k] = series[k - 1] * (pc - k + 1) / (k * c0)
        return self._compose(series)

    # -- series composition and calls ---------------------------------------

    def _compose(self, series: np.ndarray) -> "Jet":
        """sum_k series[k] * (self - value)^k, truncated (Horner)."""
        hat = self.copy()
        hat.coeffs[0] = 0.0
        result = Jet.constant(series[self.K], self.d, self.K)
        for k in range(self.K - 1, -1, -1):
            result = result * hat + series[k]
        return result

    def exp(self) -> "Jet":
        e0 = np.exp(self.value)
        series = np.array([e0 / math.factorial(k) for k in range(self.K + 1)],
                          dtype=complex)
        return self._compose(series)

    def log(self) -> "Jet":
        c0 = self.value
        if c0 == 0:
            raise DomainError("log of a jet with zero value")
        series = np.empty(self.K + 1, dtype=complex)
        series[0] = np.log(c0)
        for k in range(1, self.K + 1):
            series[k] = (-1) ** (k - 1) / (k * c0 ** k)
        return self._compose(series)

    def sqrt(self) -> "Jet":
        return self.__pow__(0.5)

    def sin(self) -> "Jet":
        c0 = self.value
        cycle = [np.sin(c0), np.cos(c0), -np.sin(c0), -np.cos(c0)]
        series = np.array([cycle[k % 4] / math.factorial(k)
                           for k in range(self.K + 1)], dtype=complex)
        return self._compose(series)

    def cos(self) -> "Jet":
        c0 = self.value
        cycle = [np.cos(c0), -np.sin(c0), -np.cos(c0), np.sin(c0)]
        series = np.array([cycle[k % 4] / math.factorial(k)
                           for k in range(self.K + 1)], dtype=complex)
        return self._compose(series)

    def bump(self) -> "Jet":
        return bumps.profile_jet(self)

    # -- evaluation ---------------------------------------------------------

    def eval_shift(self, delta) -> complex:
        """Evaluate the truncated Taylor polynomial at base + delta."""
        delta = np.asarray(delta, dtype=complex)
        E = _exponent_matrix(self.d, self.K)
        powers = np.empty((self.d, self.K + 1), dtype=complex)
        powers[:, 0] = 1.0
        for k in range(1, self.K + 1):
            powers[:, k] = powers[:, k - 1] * delta
        mono = np.ones(len(self.coeffs), dtype=complex)
        for v in range(self.d):
            mono *= powers[v, E[:, v]]
        return complex(np.sum(self.coeffs * mono))


# ---------------------------------------------------------------------------
# jets of expressions


def jet_of(e: exprlang.Expr, layout: exprlang.VarLayout, base,
           active: list[str], K: int) -> Jet:
    """Jet of an expression at ``base``; inactive variables stay frozen."""
    d = len(active)
    slots = {name: i for i, name in enumerate(active)}
    env: dict[str, object] = {}
    for name, val in zip(layout.names(), base):
        if name in slots:
            env[name] = Jet.variable(complex(val), slots[name], d, K)
        else:
            env[name] = complex(val)
    out = exprlang.evaluate(e, env)
    if not isinstance(out, Jet):
        out = Jet.constant(complex(out), d, K)
    return out


def gradient(e: exprlang.Expr, layout: exprlang.VarLayout, base,
             wrt: list[str] | None = None) -> np.ndarray:
    wrt = wrt if wrt is not None else layout.names()
    j = jet_of(e, layout, base, wrt, 1)
    pos = index_positions(len(wrt), 1)
    d = len(wrt)
    return np.array([j.coeffs[pos[tuple(1 if i == k else 0 for i in range(d))]]
                     for k in range(d)], dtype=complex)


def hessian(e: exprlang.Expr, layout: exprlang.VarLayout, base,
            wrt: list[str] | None = None) -> np.ndarray:
    wrt = wrt if wrt is not None else layout.names()
    d = len(wrt)
    j = jet_of(e, layout, base, wrt, 2)
    pos = index_positions(d, 2)
    H = np.empty((d, d), dtype=complex)
    for a in range(d):
        for b in range(a, d):
            alpha = tuple((1 if i == a else 0) + (1 if i == b else 0)
                          for i in range(d))
            c = j.coeffs[pos[alpha]]
            H[a, b] = H[b, a] = 2 * c if a == b else c
    return H
