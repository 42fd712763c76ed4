"""Scalar expressions of time: parsing, evaluation and exact differentiation.

Every time-dependent coefficient in the package is a tree of :class:`TimeExpr`
nodes in the single real variable ``t``.  Values are complex.  The grammar is::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := ('+'|'-') factor | base ('^' int)?
    base   := number | 'i' | 't' | func '(' expr ')' | '(' expr ')'
            | 'piecewise' '{' (guard ':' expr ';')+ 'else' ':' expr '}'
    guard  := '[' bound ',' bound ')' | 't' '<' bound | 't' '>=' bound
            | bound '<=' 't' '<' bound

with ``func`` one of ``sin cos exp sqrt abs recip sign``.  Piecewise guards are
half-open intervals ``[lo, hi)``; the first matching branch wins.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ExprSyntaxError, SingularityError, UnknownIdentifier

__all__ = [
    "TimeExpr", "Const", "Var", "Unary", "Binary", "Pow", "Piecewise",
    "parse", "differentiate", "evaluate", "as_expr", "const", "T",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs", "recip", "sign")

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_real(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


class TimeExpr:
    """Base class of expression nodes.  Instances are immutable."""

    __slots__ = ()

    # -- evaluation -------------------------------------------------------
    def __call__(self, t: float) -> complex:
        fn = self._fn()
        return fn(float(t))

    def _fn(self) -> Callable[[float], complex]:
        cached = self.__dict__.get("_compiled")
        if cached is None:
            cached = self._compile()
            object.__setattr__(self, "_compiled", cached)
        return cached

    def _compile(self) -> Callable[[float], complex]:
        raise NotImplementedError

    def _vfn(self) -> Callable[[np.ndarray], np.ndarray]:
        """Vectorized evaluator: 1-D float array in, complex array out."""
        cached = self.__dict__.get("_vcompiled")
        if cached is None:
            cached = self._vcompile()
            object.__setattr__(self, "_vcompiled", cached)
        return cached

    def _vcompile(self) -> Callable[[np.ndarray], np.ndarray]:
        raise NotImplementedError

    # -- structure ----------------------------------------------------------
    def children(self) -> tuple["TimeExpr", ...]:
        return ()

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    @property
    def is_constant(self) -> bool:
        return all(not isinstance(n, (Var, Piecewise)) for n in self.walk())

    def derivative(self) -> "TimeExpr":
        return differentiate(self)

    def breakpoints(self) -> list[float]:
        """Finite piecewise guard endpoints appearing anywhere in the tree."""
        pts = set()
        for node in self.walk():
            if isinstance(node, Piecewise):
                for (lo, hi), _ in node.branches:
                    for b in (lo, hi):
                        if math.isfinite(b):
                            pts.add(float(b))
        return sorted(pts)

    def excluded_points(self, lo: float, hi: float) -> list[float]:
        """Points in ``[lo, hi]`` where this expression (or a derivative
        taken from it) is not differentiable: piecewise boundaries and zeros
        of ``abs``/``sign`` arguments."""
        pts = {b for b in self.breakpoints() if lo <= b <= hi}
        for node in self.walk():
            if isinstance(node, Unary) and node.op in ("abs", "sign"):
                pts.update(_real_roots(node.arg, lo, hi))
        return sorted(pts)

    # -- operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        if not isinstance(k, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        return power(self, int(k))

    def __str__(self) -> str:
        return self._print()[0]

    def _print(self) -> tuple[str, int]:
        raise NotImplementedError


@dataclass(frozen=True, eq=True, repr=False)
class Const(TimeExpr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    def _compile(self):
        v = self.value
        return lambda t: v

    def _vcompile(self):
        v = self.value
        return lambda ts: np.full(ts.shape, v, dtype=complex)

    def _print(self):
        re_, im = self.value.real, self.value.imag
        if im == 0:
            s = _fmt_real(re_)
            return s, (_PREC_NEG if re_ < 0 else _PREC_ATOM)
        ims = "i" if im == 1 else f"{_fmt_real(im)}*i"
        if re_ == 0:
            if im == -1:
                return "-i", _PREC_NEG
            return ims, (_PREC_NEG if im < 0 else _PREC_MUL)
        sign = "-" if im < 0 else "+"
        ims = "i" if abs(im) == 1 else f"{_fmt_real(abs(im))}*i"
        return f"{_fmt_real(re_)} {sign} {ims}", _PREC_ADD

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(TimeExpr):
    def _compile(self):
        return lambda t: complex(t)

    def _vcompile(self):
        return lambda ts: ts.astype(complex)

    def _print(self):
        return "t", _PREC_ATOM

    def __repr__(self):
        return "Var()"


def _sqrt(x: complex, node, t):
    if x.imag == 0 and x.real < 0:
        raise SingularityError(t, node, "square root of a negative real")
    return cmath.sqrt(x)


def _recip(x: complex, node, t):
    if x == 0:
        raise SingularityError(t, node, "reciprocal of zero")
    return 1.0 / x


def _sign(x: complex):
    if x == 0:
        return 0j
    if x.imag == 0:
        return complex(math.copysign(1.0, x.real))
    return x / abs(x)


_UNARY_IMPL = {
    "neg": lambda x, node, t: -x,
    "sin": lambda x, node, t: cmath.sin(x),
    "cos": lambda x, node, t: cmath.cos(x),
    "exp": lambda x, node, t: cmath.exp(x),
    "sqrt": _sqrt,
    "abs": lambda x, node, t: complex(abs(x)),
    "recip": _recip,
    "sign": lambda x, node, t: _sign(x),
}


def _raise_at(mask, ts, node, reason):
    if mask.any():
        raise SingularityError(float(ts[np.argmax(mask)]), node, reason)


def _vsqrt(x, node, ts):
    _raise_at((x.imag == 0) & (x.real < 0), ts, node, "square root of a negative real")
    return np.sqrt(x)


def _vrecip(x, node, ts):
    _raise_at(x == 0, ts, node, "reciprocal of zero")
    return 1.0 / x


def _vsign(x, node, ts):
    out = np.zeros_like(x)
    real = (x.imag == 0) & (x != 0)
    out[real] = np.copysign(1.0, x.real[real])
    cplx = x.imag != 0
    out[cplx] = x[cplx] / np.abs(x[cplx])
    return out


_VUNARY_IMPL = {
    "neg": lambda x, node, ts: -x,
    "sin": lambda x, node, ts: np.sin(x),
    "cos": lambda x, node, ts: np.cos(x),
    "exp": lambda x, node, ts: np.exp(x),
    "sqrt": _vsqrt,
    "abs": lambda x, node, ts: np.abs(x).astype(complex),
    "recip": _vrecip,
    "sign": _vsign,
}


@dataclass(frozen=True, eq=True, repr=False)
class Unary(TimeExpr):
    op: str
    arg: TimeExpr

    def children(self):
        return (self.arg,)

    def _compile(self):
        f = self.arg._fn()
        impl = _UNARY_IMPL[self.op]
        node = self
        return lambda t: impl(f(t), node, t)

    def _vcompile(self):
        f = self.arg._vfn()
        impl = _VUNARY_IMPL[self.op]
        node = self
        return lambda ts: impl(f(ts), node, ts)

    def _print(self):
        if self.op == "neg":
            s, p = self.arg._print()
            if p <= _PREC_NEG:
                s = f"({s})"
            return f"-{s}", _PREC_NEG
        return f"{self.op}({self.arg})", _PREC_ATOM

    def __repr__(self):
        return f"Unary({self.op!r}, {self.arg!r})"


def _div_impl(a, b, node, t):
    if b == 0:
        raise SingularityError(t, node, "division by zero")
    return a / b


_BINARY_IMPL = {
    "+": lambda a, b, node, t: a + b,
    "-": lambda a, b, node, t: a - b,
    "*": lambda a, b, node, t: a * b,
    "/": _div_impl,
}


@dataclass(frozen=True, eq=True, repr=False)
class Binary(TimeExpr):
    op: str
    left: TimeExpr
    right: TimeExpr

    def children(self):
        return (self.left, self.right)

    def _compile(self):
        f, g = self.left._fn(), self.right._fn()
        impl = _BINARY_IMPL[self.op]
        node = self
        if self.op == "+":
            return lambda t: f(t) + g(t)
        if self.op == "*":
            return lambda t: f(t) * g(t)
        if self.op == "-":
            return lambda t: f(t) - g(t)
        return lambda t: impl(f(t), g(t), node, t)

    def _vcompile(self):
        f, g = self.left._vfn(), self.right._vfn()
        node = self
        if self.op == "+":
            return lambda ts: f(ts) + g(ts)
        if self.op == "*":
            return lambda ts: f(ts) * g(ts)
        if self.op == "-":
            return lambda ts: f(ts) - g(ts)

        def div(ts):
            b = g(ts)
            _raise_at(b == 0, ts, node, "division by zero")
            return f(ts) / b
        return div

    def _print(self):
        if self.op in "+-":
            prec = _PREC_ADD
            ls, lp = self.left._print()
            rs, rp = self.right._print()
            if lp < prec:
                ls = f"({ls})"
            if rp <= prec if self.op == "-" else rp < prec:
                rs = f"({rs})"
            if self.op == "+" and rp == _PREC_NEG:
                rs = f"({rs})"
            return f"{ls} {self.op} {rs}", prec
        prec = _PREC_MUL
        ls, lp = self.left._print()
        rs, rp = self.right._print()
        if lp < prec:
            ls = f"({ls})"
        if rp < _PREC_POW:
            rs = f"({rs})"
        return f"{ls}{self.op}{rs}", prec

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Pow(TimeExpr):
    base: TimeExpr
    k: int

    def children(self):
        return (self.base,)

    def _compile(self):
        f = self.base._fn()
        k = self.k
        node = self

        def fn(t):
            b = f(t)
            if k < 0 and b == 0:
                raise SingularityError(t, node, "negative power of zero")
            return b ** k
        return fn

    def _vcompile(self):
        f = self.base._vfn()
        k = self.k
        node = self

        def fn(ts):
            b = f(ts)
            if k < 0:
                _raise_at(b == 0, ts, node, "negative power of zero")
                return 1.0 / b ** -k
            return b ** k
        return fn

    def _print(self):
        s, p = self.base._print()
        if p < _PREC_ATOM:
            s = f"({s})"
        return f"{s}^{self.k}", _PREC_POW

    def __repr__(self):
        return f"Pow({self.base!r}, {self.k})"


@dataclass(frozen=True, eq=True, repr=False)
class Piecewise(TimeExpr):
    """Ordered ``([lo, hi), expr)`` branches with a default branch."""

    branches: tuple[tuple[tuple[float, float], TimeExpr], ...]
    default: TimeExpr

    def children(self):
        return tuple(e for _, e in self.branches) + (self.default,)

    def _compile(self):
        table = [(lo, hi, e._fn()) for (lo, hi), e in self.branches]
        d = self.default._fn()

        def fn(t):
            for lo, hi, f in table:
                if lo <= t < hi:
                    return f(t)
            return d(t)
        return fn

    def _vcompile(self):
        table = [(lo, hi, e._vfn()) for (lo, hi), e in self.branches]
        d = self.default._vfn()

        def fn(ts):
            # each branch only sees its own times, so an unselected branch cannot raise
            out = np.empty(ts.shape, dtype=complex)
            todo = np.ones(ts.shape, dtype=bool)
            for lo, hi, f in table:
                m = todo & (lo <= ts) & (ts < hi)
                if m.any():
                    out[m] = f(ts[m])
                    todo &= ~m
            if todo.any():
                out[todo] = d(ts[todo])
            return out
        return fn

    def _print(self):
        parts = [f"[{_fmt_real(lo)}, {_fmt_real(hi)}): {e}; "
                 for (lo, hi), e in self.branches]
        return "piecewise{" + "".join(parts) + f"else: {self.default}" + "}", _PREC_ATOM

    def __repr__(self):
        return f"Piecewise({self.branches!r}, {self.default!r})"


T = Var()
ZERO = Const(0)
ONE = Const(1)


def const(value) -> Const:
    return Const(value)


def as_expr(x) -> TimeExpr:
    if isinstance(x, TimeExpr):
        return x
    if isinstance(x, str):
        return parse(x)
    if isinstance(x, (int, float, complex, np.number)):
        return Const(complex(x))
    raise TypeError(f"cannot convert {type(x).__name__} to TimeExpr")


# -- smart constructors (light constant folding only) -----------------------

def _is(x: TimeExpr, v) -> bool:
    return isinstance(x, Const) and x.value == v


def _is_recip(x: TimeExpr) -> bool:
    return isinstance(x, Binary) and x.op == "/" and _is(x.left, 1)


def add(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(b, Unary) and b.op == "neg":
        return sub(a, b.arg)
    return Binary("+", a, b)


def sub(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if _is_recip(b):
        return div(a, b.right)
    if _is_recip(a):
        return div(b, a.right)
    return Binary("*", a, b)


def div(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if _is_recip(b):
        return mul(a, b.right)
    return Binary("/", a, b)


def neg(a: TimeExpr) -> TimeExpr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(a: TimeExpr, k: int) -> TimeExpr:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const) and (k > 0 or a.value != 0):
        return Const(a.value ** k)
    return Pow(a, k)


def func(name: str, a: TimeExpr) -> TimeExpr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(a, Const):
        try:
            return Const(_UNARY_IMPL[name](a.value, None, 0.0))
        except SingularityError:
            pass
    return Unary(name, a)


def piecewise(branches: Sequence[tuple[tuple[float, float], TimeExpr]],
              default: TimeExpr) -> TimeExpr:
    br = tuple(((float(lo), float(hi)), as_expr(e)) for (lo, hi), e in branches)
    for (lo, hi), _ in br:
        if not lo < hi:
            raise ValueError(f"empty guard interval [{lo}, {hi})")
    return Piecewise(br, as_expr(default))


# -- differentiation -----------------------------------------------------------

def differentiate(e: TimeExpr) -> TimeExpr:
    """Exact derivative d/dt.

    Piecewise nodes are differentiated branchwise and ``abs`` becomes
    ``sign(arg)*arg'`` (valid for real-valued arguments); the resulting tree
    keeps the guards and ``sign`` nodes so :meth:`TimeExpr.excluded_points`
    reports the non-differentiable points.
    """
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = differentiate(a), differentiate(b)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        # quotient rule
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(e, Pow):
        return mul(mul(Const(e.k), power(e.base, e.k - 1)), differentiate(e.base))
    if isinstance(e, Unary):
        a = e.arg
        da = differentiate(a)
        op = e.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            inner = func("cos", a)
        elif op == "cos":
            inner = neg(func("sin", a))
        elif op == "exp":
            inner = e
        elif op == "sqrt":
            inner = div(ONE, mul(Const(2), e))
        elif op == "abs":
            inner = func("sign", a)
        elif op == "recip":
            inner = neg(power(a, -2))
        elif op == "sign":
            # zero away from the jump; the jump itself is an excluded point
            return _flagged_zero(a)
        else:  # pragma: no cover - table is closed
            raise ValueError(op)
        return mul(inner, da)
    if isinstance(e, Piecewise):
        return Piecewise(tuple((g, differentiate(x)) for g, x in e.branches),
                         differentiate(e.default))
    raise TypeError(type(e).__name__)


def _flagged_zero(arg: TimeExpr) -> TimeExpr:
    # 0*sign(arg) keeps the kink location visible to excluded_points()
    return Binary("*", ZERO, Unary("sign", arg))


def _real_roots(e: TimeExpr, lo: float, hi: float, samples: int = 2001) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return []
    fn = e._fn()
    ts = np.linspace(lo, hi, samples)
    try:
        vals = np.array([fn(t).real for t in ts])
    except SingularityError:
        return []
    roots = [float(t) for t, v in zip(ts, vals) if v == 0.0]
    for k in range(samples - 1):
        if vals[k] * vals[k + 1] < 0:
            roots.append(brentq(lambda s: fn(s).real, ts[k], ts[k + 1], xtol=1e-14))
    return sorted(set(roots))


def evaluate(e: TimeExpr, ts) -> np.ndarray:
    """Evaluate on an array of times."""
    ts = np.asarray(ts, dtype=float)
    return e._vfn()(ts.ravel()).reshape(ts.shape)


# -- parser ---------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|[-+*/^(){}\[\],:;<])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    pos = 0
    toks = []
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


@dataclass
class _Parser:
    src: str
    toks: list = field(default_factory=list)
    i: int = 0

    def __post_init__(self):
        self.toks = _tokenize(self.src)

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def accept(self, text: str) -> bool:
        if self.cur.kind in ("op", "name") and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            got = self.cur.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, got {got!r}", self.cur.offset)

    def parse(self) -> TimeExpr:
        e = self.expr()
        if self.cur.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.cur.text!r}", self.cur.offset)
        return e

    def expr(self) -> TimeExpr:
        e = self.term()
        while True:
            if self.accept("+"):
                e = add(e, self.term())
            elif self.accept("-"):
                e = sub(e, self.term())
            else:
                return e

    def term(self) -> TimeExpr:
        e = self.factor()
        while True:
            if self.accept("*"):
                e = mul(e, self.factor())
            elif self.accept("/"):
                e = div(e, self.factor())
            else:
                return e

    def factor(self) -> TimeExpr:
        if self.accept("-"):
            return neg(self.factor())
        if self.accept("+"):
            return self.factor()
        b = self.base()
        if self.accept("^"):
            return power(b, self.integer())
        return b

    def integer(self) -> int:
        sign = 1
        paren = self.accept("(")
        if self.accept("-"):
            sign = -1
        elif self.accept("+"):
            pass
        tok = self.cur
        if tok.kind != "number" or not tok.text.isdigit():
            raise ExprSyntaxError("exponent must be an integer", tok.offset)
        self.i += 1
        if paren:
            self.expect(")")
        return sign * int(tok.text)

    def number(self) -> float:
        sign = 1.0
        if self.accept("-"):
            sign = -1.0
        elif self.accept("+"):
            pass
        tok = self.cur
        if tok.kind == "name" and tok.text == "inf":
            self.i += 1
            return sign * math.inf
        if tok.kind != "number":
            raise ExprSyntaxError("expected a number", tok.offset)
        self.i += 1
        return sign * float(tok.text)

    def base(self) -> TimeExpr:
        tok = self.cur
        if tok.kind == "number":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text == "t":
                return T
            if tok.text == "i":
                return Const(1j)
            if tok.text == "piecewise":
                return self.piecewise()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return func(tok.text, arg)
            raise UnknownIdentifier(tok.text, tok.offset)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        got = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {got!r}", tok.offset)

    def guard(self) -> tuple[float, float]:
        start = self.cur.offset
        if self.accept("["):
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect(")")
        elif self.accept("t"):
            if self.accept("<"):
                lo, hi = -math.inf, self.number()
            elif self.accept(">="):
                lo, hi = self.number(), math.inf
            else:
                raise ExprSyntaxError("guards must be half-open: use 't<c' or 't>=c'",
                                      self.cur.offset)
        else:
            lo = self.number()
            self.expect("<=")
            self.expect("t")
            self.expect("<")
            hi = self.number()
        if not lo < hi:
            raise ExprSyntaxError("empty guard interval", start)
        return lo, hi

    def piecewise(self) -> TimeExpr:
        self.expect("{")
        branches = []
        while not self.accept("else"):
            g = self.guard()
            self.expect(":")
            branches.append((g, self.expr()))
            self.expect(";")
        if not branches:
            raise ExprSyntaxError("piecewise needs at least one guarded branch",
                                  self.cur.offset)
        self.expect(":")
        default = self.expr()
        self.accept(";")
        self.expect("}")
        return Piecewise(tuple(branches), default)


def parse(source: str) -> TimeExpr:
    """Parse ``source`` into an expression tree.

    Raises :class:`~ltvpass.errors.ExprSyntaxError` (with byte offset) or
    :class:`~ltvpass.errors.UnknownIdentifier`.
    """
    return _Parser(source).parse()
