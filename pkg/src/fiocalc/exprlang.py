"""Small expression language for phases and amplitudes.

Grammar (operator precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``,
``^`` right-associative)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ["^" unary]
    atom    := NUMBER | "i" | VARIABLE | call | "(" expr ")"
    call    := ("exp"|"log"|"sqrt"|"sin"|"cos"|"bump") "(" expr ")"
             | "norm" "(" GROUP ")"

Variables are an allowed group prefix followed by a 1-based index
(``x1``, ``theta2``, ...).  ``i`` is the imaginary unit.  ``norm(g)``
is the Euclidean norm of the variable group ``g`` (smooth away from the
origin, which is excluded for frequency groups).  ``bump(e)`` is a fixed
smooth compactly supported profile of ``e``: identically 1 for
``|e| <= 1/2``, identically 0 for ``|e| >= 1``.

Expressions are immutable after parsing and evaluation is pure, so
parsed trees can be shared freely between threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, LayoutError, ParseError

GROUP_PREFIXES = ("theta", "sigma", "eta", "x", "y", "z", "w")
_CALLS = ("exp", "log", "sqrt", "sin", "cos", "bump")

_VAR_RE = re.compile(r"^(theta|sigma|eta|x|y|z|w)([1-9][0-9]*)$")


# ---------------------------------------------------------------------------
# expression nodes


@dataclass(frozen=True)
class Num:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


@dataclass(frozen=True)
class GroupNorm:
    group: str


Expr = Num | Var | Neg | BinOp | Call | GroupNorm


def num(v) -> Num:
    return Num(complex(v))


def var(name: str) -> Var:
    return Var(name)


def add(a: Expr, b: Expr) -> BinOp:
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> BinOp:
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> BinOp:
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> BinOp:
    return BinOp("/", a, b)


def pow_(a: Expr, b: Expr) -> BinOp:
    return BinOp("^", a, b)


# ---------------------------------------------------------------------------
# variable layout


@dataclass(frozen=True)
class VarGroup:
    name: str
    size: int
    role: str  # "base" | "frequency" | "fiber" | "param"


class VarLayout:
    """Named variable groups with sizes and roles.

    The frequency groups define the homogeneity direction; their joint
    origin is excluded from the evaluation domain.  ``fiber`` groups are
    degree-zero fiber variables (used by composed phases, where the
    frequency scaling leaves them fixed).
    """

    def __init__(self, groups: list[VarGroup]):
        names = [g.name for g in groups]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate group names in layout: {names}")
        for g in groups:
            if g.name not in GROUP_PREFIXES:
                raise LayoutError(f"unknown group name {g.name!r}")
            if g.size < 1:
                raise LayoutError(f"group {g.name!r} has size {g.size} < 1")
            if g.role not in ("base", "frequency", "fiber", "param"):
                raise LayoutError(f"unknown role {g.role!r} for group {g.name!r}")
        self.groups = tuple(groups)

    @classmethod
    def make(cls, **sizes: int) -> "VarLayout":
        """Layout from group sizes with conventional roles.

        ``x``/``y``/``z`` are base variables, ``theta``/``sigma``/``eta``
        frequency variables, ``w`` parameters.
        """
        roles = {"x": "base", "y": "base", "z": "base",
                 "theta": "frequency", "sigma": "frequency", "eta": "frequency",
                 "w": "param"}
        return cls([VarGroup(n, s, roles[n]) for n, s in sizes.items()])

    def names(self) -> list[str]:
        out = []
        for g in self.groups:
            out.extend(f"{g.name}{k}" for k in range(1, g.size + 1))
        return out

    def group_names(self, *roles: str) -> list[str]:
        out = []
        for g in self.groups:
            if not roles or g.role in roles:
                out.extend(f"{g.name}{k}" for k in range(1, g.size + 1))
        return out

    def group(self, name: str) -> VarGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise LayoutError(f"no group {name!r} in layout")

    def has_group(self, name: str) -> bool:
        return any(g.name == name for g in self.groups)

    def size(self) -> int:
        return sum(g.size for g in self.groups)

    def env(self, point) -> dict[str, Any]:
        names = self.names()
        if len(point) != len(names):
            raise LayoutError(
                f"point has {len(point)} coordinates, layout needs {len(names)}")
        return dict(zip(names, point))

    def describe(self) -> str:
        return ",".join(f"{g.name}:{g.size}" for g in self.groups)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))")


class _Tokens:
    def __init__(self, source: str):
        self.source = source
        self.toks: list[tuple[str, str, int, int]] = []
        line, col = 1, 1
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None or m.end() == pos:
                ws = source[pos:]
                stripped = ws.lstrip()
                if not stripped:
                    break
                off = len(ws) - len(stripped)
                line, col = _advance(source, pos, pos + off, line, col)
                raise ParseError(f"unexpected character {stripped[0]!r}", line, col)
            start = m.start(m.lastgroup)
            line, col = _advance(source, pos, start, line, col)
            text = m.group(m.lastgroup)
            self.toks.append((m.lastgroup, text, line, col))
            line, col = _advance(source, start, m.end(), line, col)
            pos = m.end()
        self.idx = 0

    def peek(self):
        if self.idx < len(self.toks):
            return self.toks[self.idx]
        return ("eof", "", *self._end_pos())

    def next(self):
        tok = self.peek()
        if tok[0] != "eof":
            self.idx += 1
        return tok

    def _end_pos(self):
        line = self.source.count("\n") + 1
        last = self.source.rsplit("\n", 1)[-1]
        return line, len(last) + 1


def _advance(source: str, start: int, end: int, line: int, col: int):
    chunk = source[start:end]
    nl = chunk.count("\n")
    if nl:
        return line + nl, len(chunk.rsplit("\n", 1)[-1]) + 1
    return line, col + len(chunk)


def parse(source: str) -> Expr:
    """Parse a source string into an expression tree."""
    toks = _Tokens(source)
    e = _parse_expr(toks)
    kind, text, line, col = toks.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {text!r} after expression", line, col)
    return e


def _parse_expr(toks: _Tokens) -> Expr:
    e = _parse_term(toks)
    while toks.peek()[1] in ("+", "-"):
        op = toks.next()[1]
        e = BinOp(op, e, _parse_term(toks))
    return e


def _parse_term(toks: _Tokens) -> Expr:
    e = _parse_unary(toks)
    while toks.peek()[1] in ("*", "/"):
        op = toks.next()[1]
        e = BinOp(op, e, _parse_unary(toks))
    return e


def _parse_unary(toks: _Tokens) -> Expr:
    if toks.peek()[1] == "-":
        toks.next()
        return Neg(_parse_unary(toks))
    return _parse_power(toks)


def _parse_power(toks: _Tokens) -> Expr:
    base = _parse_atom(toks)
    if toks.peek()[1] == "^":
        toks.next()
        return BinOp("^", base, _parse_unary(toks))
    return base


def _expect(toks: _Tokens, text: str):
    kind, got, line, col = toks.next()
    if got != text:
        what = repr(got) if kind != "eof" else "end of input"
        raise ParseError(f"expected {text!r}, found {what}", line, col)


def _parse_atom(toks: _Tokens) -> Expr:
    kind, text, line, col = toks.next()
    if kind == "num":
        return Num(complex(float(text)))
    if text == "(":
        e = _parse_expr(toks)
        kind2, text2, line2, col2 = toks.peek()
        if text2 != ")":
            raise ParseError("unclosed parenthesis", line, col)
        toks.next()
        return e
    if kind == "ident":
        if text == "i":
            return Num(1j)
        if text == "norm":
            _expect(toks, "(")
            gkind, gtext, gline, gcol = toks.next()
            if gkind != "ident" or gtext not in GROUP_PREFIXES:
                raise ParseError(
                    f"norm() takes a variable group name, found {gtext!r}",
                    gline, gcol)
            _expect(toks, ")")
            return GroupNorm(gtext)
        if text in _CALLS:
            _expect(toks, "(")
            arg = _parse_expr(toks)
            kind2, text2, line2, col2 = toks.peek()
            if text2 == ",":
                raise ParseError(f"{text}() takes exactly one argument",
                                 line2, col2)
            if text2 != ")":
                raise ParseError("unclosed parenthesis", line, col)
            toks.next()
            return Call(text, arg)
        if _VAR_RE.match(text):
            return Var(text)
        raise ParseError(f"unknown identifier {text!r}", line, col)
    raise ParseError(f"unexpected {text!r}", line, col)


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def _fmt_num(v: complex) -> str:
    if v == 1j:
        return "i"
    if v.imag == 0:
        r = v.real
        if r == int(r) and abs(r) < 1e15:
            return str(int(r))
        return repr(r)
    # not producible by the parser; printed for semantic round-trip only
    return f"({_fmt_num(complex(v.real))}+{_fmt_num(complex(v.imag))}*i)"


def to_source(e: Expr) -> str:
    """Print an expression; ``parse(to_source(e))`` reproduces parser output."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, GroupNorm):
        return f"norm({e.group})"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if _prec(e.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        lp, rp = _prec(e.left), _prec(e.right)
        ls, rs = to_source(e.left), to_source(e.right)
        if e.op == "^":
            if lp <= _PREC["^"]:
                ls = f"({ls})"
            if rp < _PREC["neg"]:
                rs = f"({rs})"
        else:
            # + - * / associate left; a right operand at the same level
            # must keep its parentheses to round-trip structurally
            p = _PREC[e.op]
            if lp < p:
                ls = f"({ls})"
            if rp <= p:
                rs = f"({rs})"
        return f"{ls}{e.op}{rs}"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# evaluation

def _is_plain_number(v) -> bool:
    return isinstance(v, (int, float, complex, np.number, np.ndarray))


def _apply_call(fn: str, v):
    if not _is_plain_number(v):
        return getattr(v, fn)()
    if fn == "exp":
        return np.exp(v)
    if fn == "log":
        if isinstance(v, (int, float, complex, np.number)) and v == 0:
            raise DomainError("log(0)")
        return np.log(v)
    if fn == "sqrt":
        return np.sqrt(np.asarray(v, dtype=complex)) if isinstance(v, np.ndarray) \
            else np.sqrt(complex(v))
    if fn == "sin":
        return np.sin(v)
    if fn == "cos":
        return np.cos(v)
    if fn == "bump":
        from . import bumps
        return bumps.profile(v)
    raise DomainError(f"unknown call {fn!r}")


def _div_values(a, b):
    if isinstance(b, (int, float, complex, np.number)) and b == 0:
        raise DomainError("division by zero")
    return a / b


def _pow_values(a, b):
    if _is_plain_number(a):
        if isinstance(a, np.ndarray):
            return np.asarray(a, dtype=complex) ** b
        return complex(a) ** b
    return a ** b  # jets dispatch through Jet.__pow__


def evaluate(e: Expr, env: Mapping[str, Any]):
    """Evaluate with values from ``env``; duck-typed over scalars, arrays
    and jets.  Principal branches for log/sqrt/fractional powers."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"variable {e.name!r} not bound") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        return _apply_call(e.fn, evaluate(e.arg, env))
    if isinstance(e, GroupNorm):
        k, total = 1, None
        while f"{e.group}{k}" in env:
            v = env[f"{e.group}{k}"]
            total = v * v if total is None else total + v * v
            k += 1
        if total is None:
            raise DomainError(f"norm({e.group}): group not bound")
        return _apply_call("sqrt", total)
    if isinstance(e, BinOp):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            return _div_values(a, b)
        if e.op == "^":
            return _pow_values(a, b)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate_at(e: Expr, layout: VarLayout, point) -> complex:
    """Evaluate at a flat coordinate vector ordered by the layout."""
    v = evaluate(e, layout.env([complex(p) for p in point]))
    return complex(v)


def substitute(e: Expr, values: Mapping[str, complex]) -> Expr:
    """Replace variables by numeric literals (used to freeze parameters)."""
    if isinstance(e, Var) and e.name in values:
        return Num(complex(values[e.name]))
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, values))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, values))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, values), substitute(e.right, values))
    return e


def free_variables(e: Expr, group_sizes: Mapping[str, int] | None = None) -> set[str]:
    """Variable names appearing in the tree.  ``norm(g)`` counts as all of
    group ``g`` when its size is supplied."""
    out: set[str] = set()

    def walk(node):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            walk(node.arg)
        elif isinstance(node, Call):
            walk(node.arg)
        elif isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, GroupNorm):
            if group_sizes and node.group in group_sizes:
                out.update(f"{node.group}{k}"
                           for k in range(1, group_sizes[node.group] + 1))
            else:
                out.add(f"{node.group}1")

    walk(e)
    return out
