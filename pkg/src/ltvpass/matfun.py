"""Matrix-valued functions of time with exact derivatives.

A :class:`MatrixFunction` evaluates to a complex ``rows x cols`` array at a
time ``t`` and knows its own derivative.  Leaves are grids of expressions
(:class:`ExprMatrix`) or numeric closures with a supplied derivative
(:class:`Callable`); everything else is built by composition (sum, product,
inverse, block assembly, time reparametrization, ...) and differentiated by the
usual product/chain rules, so no finite differences are ever taken.
"""

from __future__ import annotations

import math
from typing import Callable as _Fn, Sequence

import numpy as np

from . import expr as ex
from .errors import DimensionMismatch, DomainError

__all__ = [
    "MatrixFunction", "ExprMatrix", "Callable", "matrix", "constant", "eye",
    "zeros", "block", "as_matrix_function", "invert_monotone",
]

Domain = tuple[float, float]
FULL_LINE: Domain = (-math.inf, math.inf)


def _intersect(*domains: Domain) -> Domain:
    lo = max(d[0] for d in domains)
    hi = min(d[1] for d in domains)
    if lo > hi:
        raise DomainError(f"empty domain intersection {domains}")
    return lo, hi


class MatrixFunction:
    """Base class.  Subclasses implement ``_eval`` and ``_derivative``."""

    shape: tuple[int, int]
    domain: Domain
    _cache: tuple[float, np.ndarray] | None = None
    # value of a node that does not depend on t; set for constant leaves and,
    # after the first evaluation, for nodes whose children are all constant
    _const: np.ndarray | None = None
    _const_checked: bool = False

    def __call__(self, t: float) -> np.ndarray:
        c = self._const
        if c is not None:
            return c
        cache = self._cache
        if cache is not None and cache[0] == t:
            return cache[1]
        t = float(t)
        val = self._eval(t)
        if val.dtype != complex or val.shape != self.shape:
            val = np.asarray(val, dtype=complex).reshape(self.shape)
        val.flags.writeable = False
        self._cache = (t, val)
        if not self._const_checked:
            self._const_checked = True
            ch = self.children()
            if ch and all(x._const is not None for x in ch):
                self._const = val
        return val

    def _eval(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def derivative(self) -> "MatrixFunction":
        d = self.__dict__.get("_deriv")
        if d is None:
            d = self._derivative()
            self.__dict__["_deriv"] = d
        return d

    def _derivative(self) -> "MatrixFunction":
        raise NotImplementedError(f"{type(self).__name__} has no derivative")

    def children(self) -> tuple["MatrixFunction", ...]:
        return ()

    def excluded_points(self, lo: float, hi: float) -> list[float]:
        """Jumps/kinks of the coefficients in ``[lo, hi]`` (integrator breakpoints
        and points where the derivative is undefined)."""
        pts: set[float] = set()
        for c in self.children():
            pts.update(c.excluded_points(lo, hi))
        return sorted(pts)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def sample(self, ts) -> np.ndarray:
        """Values at every time in ``ts`` stacked as ``(len(ts), rows, cols)``."""
        ts = np.asarray(ts, dtype=float).ravel()
        if self._const is not None:
            return np.broadcast_to(self._const, (ts.size,) + self.shape).copy()
        cache = self.__dict__.get("_sample_cache")
        if cache is not None and cache[0].shape == ts.shape and np.array_equal(cache[0], ts):
            return cache[1].copy()
        out = np.asarray(self._eval_many(ts), dtype=complex).reshape((ts.size,) + self.shape)
        self.__dict__["_sample_cache"] = (ts.copy(), out)
        return out.copy()

    def _eval_many(self, ts: np.ndarray) -> np.ndarray:
        out = np.empty((ts.size,) + self.shape, dtype=complex)
        for k, t in enumerate(ts):
            out[k] = self(t)
        return out

    def check_domain(self, *ts: float) -> None:
        lo, hi = self.domain
        for t in ts:
            if not lo <= t <= hi:
                raise DomainError(f"t={t!r} outside domain [{lo}, {hi}]")

    # -- algebra --------------------------------------------------------------
    def __add__(self, other):
        return Sum(self, as_matrix_function(other, self.shape, self.domain))

    def __radd__(self, other):
        return Sum(as_matrix_function(other, self.shape, self.domain), self)

    def __sub__(self, other):
        return Sum(self, Neg(as_matrix_function(other, self.shape, self.domain)))

    def __rsub__(self, other):
        return Sum(as_matrix_function(other, self.shape, self.domain), Neg(self))

    def __neg__(self):
        return Neg(self)

    def __matmul__(self, other):
        return Product(self, as_matrix_function(other, domain=self.domain))

    def __rmatmul__(self, other):
        return Product(as_matrix_function(other, domain=self.domain), self)

    def __mul__(self, scalar):
        return Scaled(_as_scalar(scalar, self.domain), self)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        s = _as_scalar(scalar, self.domain)
        return Scaled(Inverse(s), self)

    @property
    def H(self) -> "MatrixFunction":
        return ConjT(self)

    def inv(self) -> "MatrixFunction":
        return Inverse(self)

    def __getitem__(self, key):
        rows, cols = key
        return Slice(self, _as_slice(rows), _as_slice(cols))

    def compose(self, theta: ex.TimeExpr, domain: Domain) -> "MatrixFunction":
        """``t -> self(theta(t))`` on the new ``domain``."""
        return Composed(self, theta, domain)

    def to_exprs(self) -> list[list[ex.TimeExpr]] | None:
        """Entrywise expressions if this function is expressible in the
        expression language, else ``None``."""
        return None

    def to_strings(self) -> list[list[str]] | None:
        e = self.to_exprs()
        return None if e is None else [[str(x) for x in row] for row in e]


def _as_slice(k) -> slice:
    if isinstance(k, slice):
        return k
    k = int(k)
    return slice(k, k + 1)


def _as_scalar(s, domain) -> "MatrixFunction":
    if isinstance(s, MatrixFunction):
        if s.shape != (1, 1):
            raise DimensionMismatch("scalar factor must be 1x1")
        return s
    return ExprMatrix([[ex.as_expr(s)]], domain)


def as_matrix_function(x, shape=None, domain: Domain = FULL_LINE) -> MatrixFunction:
    """Promote numbers, arrays, expressions and nested lists to a MatrixFunction."""
    if isinstance(x, MatrixFunction):
        if shape is not None and x.shape != tuple(shape):
            raise DimensionMismatch(f"shape {x.shape} != {tuple(shape)}")
        return x
    if isinstance(x, (int, float, complex, np.number)) and shape is not None:
        return constant(np.full(shape, complex(x)), domain)
    if isinstance(x, (ex.TimeExpr, str)) and shape is not None:
        e = ex.as_expr(x)
        return ExprMatrix([[e] * shape[1] for _ in range(shape[0])], domain)
    if isinstance(x, np.ndarray) and x.dtype != object:
        return constant(x, domain)
    return matrix(x, domain)


class ExprMatrix(MatrixFunction):
    """Leaf: a grid of :class:`~ltvpass.expr.TimeExpr` entries."""

    def __init__(self, entries: Sequence[Sequence], domain: Domain = FULL_LINE):
        rows = [[ex.as_expr(e) for e in row] for row in entries]
        if not rows or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch("matrix rows must be nonempty and equally long")
        self.entries = tuple(tuple(r) for r in rows)
        self.shape = (len(rows), len(rows[0]))
        self.domain = (float(domain[0]), float(domain[1]))
        flat = [e for r in self.entries for e in r]
        # constant entries are folded into a base array; only the rest is evaluated
        self._base = np.array([e.value if isinstance(e, ex.Const) else 0 for e in flat],
                              dtype=complex).reshape(self.shape)
        self._base.flags.writeable = False
        self._live = [(k, e._fn()) for k, e in enumerate(flat) if not isinstance(e, ex.Const)]
        self._vlive = [(k, e) for k, e in enumerate(flat) if not isinstance(e, ex.Const)]
        if not self._live:
            self._const = self._base

    def _eval(self, t):
        if not self._live:
            return self._base
        out = self._base.copy()
        flat = out.reshape(-1)
        for k, f in self._live:
            flat[k] = f(t)
        return out

    def _eval_many(self, ts):
        out = np.broadcast_to(self._base.reshape(-1), (ts.size, self._base.size)).copy()
        for k, e in self._vlive:
            out[:, k] = e._vfn()(ts)
        return out

    def _derivative(self):
        return ExprMatrix([[ex.differentiate(e) for e in r] for r in self.entries],
                          self.domain)

    def excluded_points(self, lo, hi):
        pts: set[float] = set()
        for r in self.entries:
            for e in r:
                if not e.is_constant:
                    pts.update(e.excluded_points(lo, hi))
        return sorted(pts)

    @property
    def is_constant(self) -> bool:
        return all(e.is_constant for r in self.entries for e in r)

    def to_exprs(self):
        return [list(r) for r in self.entries]

    def __repr__(self):
        return f"ExprMatrix({self.to_strings()!r}, domain={self.domain})"


class Callable(MatrixFunction):
    """Leaf: numeric closure ``fn(t) -> array`` with an optional derivative."""

    def __init__(self, fn: _Fn[[float], np.ndarray], shape, domain: Domain = FULL_LINE,
                 derivative: "MatrixFunction | _Fn | None" = None,
                 points: Sequence[float] = (), name: str = "callable"):
        self._fn = fn
        self.shape = tuple(shape)
        self.domain = (float(domain[0]), float(domain[1]))
        self._d = derivative
        self._points = sorted(float(p) for p in points)
        self.name = name

    def _eval(self, t):
        return self._fn(t)

    def _derivative(self):
        if self._d is None:
            raise NotImplementedError(f"{self.name}: derivative not available")
        if isinstance(self._d, MatrixFunction):
            return self._d
        return Callable(self._d, self.shape, self.domain, None, self._points,
                        name=f"d/dt {self.name}")

    def excluded_points(self, lo, hi):
        return [p for p in self._points if lo <= p <= hi]

    def __repr__(self):
        return f"Callable({self.name}, shape={self.shape})"


class Sum(MatrixFunction):
    def __init__(self, a: MatrixFunction, b: MatrixFunction):
        if a.shape != b.shape:
            raise DimensionMismatch(f"cannot add {a.shape} and {b.shape}")
        self.a, self.b = a, b
        self.shape = a.shape
        self.domain = _intersect(a.domain, b.domain)

    def children(self):
        return (self.a, self.b)

    def _eval(self, t):
        return self.a(t) + self.b(t)

    def _eval_many(self, ts):
        return self.a.sample(ts) + self.b.sample(ts)

    def _derivative(self):
        return Sum(self.a.derivative(), self.b.derivative())

    def to_exprs(self):
        ea, eb = self.a.to_exprs(), self.b.to_exprs()
        if ea is None or eb is None:
            return None
        return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(ea, eb)]


class Neg(MatrixFunction):
    def __init__(self, a: MatrixFunction):
        self.a = a
        self.shape = a.shape
        self.domain = a.domain

    def children(self):
        return (self.a,)

    def _eval(self, t):
        return -self.a(t)

    def _eval_many(self, ts):
        return -self.a.sample(ts)

    def _derivative(self):
        return Neg(self.a.derivative())

    def to_exprs(self):
        ea = self.a.to_exprs()
        return None if ea is None else [[-x for x in r] for r in ea]


class Product(MatrixFunction):
    def __init__(self, a: MatrixFunction, b: MatrixFunction):
        if a.shape[1] != b.shape[0]:
            raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
        self.a, self.b = a, b
        self.shape = (a.shape[0], b.shape[1])
        self.domain = _intersect(a.domain, b.domain)

    def children(self):
        return (self.a, self.b)

    def _eval(self, t):
        return self.a(t) @ self.b(t)

    def _eval_many(self, ts):
        return self.a.sample(ts) @ self.b.sample(ts)

    def _derivative(self):
        return Sum(Product(self.a.derivative(), self.b), Product(self.a, self.b.derivative()))

    def to_exprs(self):
        ea, eb = self.a.to_exprs(), self.b.to_exprs()
        if ea is None or eb is None:
            return None
        out = []
        for i in range(self.shape[0]):
            row = []
            for j in range(self.shape[1]):
                acc = ex.ZERO
                for k in range(self.a.shape[1]):
                    acc = acc + ea[i][k] * eb[k][j]
                row.append(acc)
            out.append(row)
        return out


class Scaled(MatrixFunction):
    """Scalar function (1x1) times matrix function."""

    def __init__(self, s: MatrixFunction, a: MatrixFunction):
        self.s, self.a = s, a
        self.shape = a.shape
        self.domain = _intersect(s.domain, a.domain)

    def children(self):
        return (self.s, self.a)

    def _eval(self, t):
        return self.s(t)[0, 0] * self.a(t)

    def _eval_many(self, ts):
        return self.s.sample(ts) * self.a.sample(ts)

    def _derivative(self):
        return Sum(Scaled(self.s.derivative(), self.a), Scaled(self.s, self.a.derivative()))

    def to_exprs(self):
        es, ea = self.s.to_exprs(), self.a.to_exprs()
        if es is None or ea is None:
            return None
        return [[es[0][0] * x for x in r] for r in ea]


def _all_real(e: ex.TimeExpr) -> bool:
    return all(n.value.imag == 0 for n in e.walk() if isinstance(n, ex.Const)) and \
        not any(isinstance(n, ex.Unary) and n.op == "sqrt" for n in e.walk())


class ConjT(MatrixFunction):
    def __init__(self, a: MatrixFunction):
        self.a = a
        self.shape = (a.shape[1], a.shape[0])
        self.domain = a.domain

    def children(self):
        return (self.a,)

    def _eval(self, t):
        return self.a(t).conj().T

    def _eval_many(self, ts):
        return self.a.sample(ts).conj().transpose(0, 2, 1)

    def _derivative(self):
        return ConjT(self.a.derivative())

    @property
    def H(self):
        return self.a

    def to_exprs(self):
        ea = self.a.to_exprs()
        if ea is None or not all(_all_real(x) for r in ea for x in r):
            return None
        return [list(col) for col in zip(*ea)]


class Inverse(MatrixFunction):
    """Pointwise inverse via a numeric solve; ``d(X^-1) = -X^-1 X' X^-1``."""

    def __init__(self, a: MatrixFunction):
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch("only square matrices can be inverted")
        self.a = a
        self.shape = a.shape
        self.domain = a.domain

    def children(self):
        return (self.a,)

    def _eval(self, t):
        from .hermlin import inv
        return inv(self.a(t))

    def _eval_many(self, ts):
        from .hermlin import inv_many
        return inv_many(self.a.sample(ts))

    def _derivative(self):
        return Neg(Product(Product(self, self.a.derivative()), self))

    def inv(self):
        return self.a

    def to_exprs(self):
        ea = self.a.to_exprs()
        if ea is None or self.shape != (1, 1):
            return None
        return [[ex.ONE / ea[0][0]]]


class Slice(MatrixFunction):
    def __init__(self, a: MatrixFunction, rows: slice, cols: slice):
        self.a, self.rs, self.cs = a, rows, cols
        r = range(a.shape[0])[rows]
        c = range(a.shape[1])[cols]
        self.shape = (len(r), len(c))
        self.domain = a.domain

    def children(self):
        return (self.a,)

    def _eval(self, t):
        return self.a(t)[self.rs, self.cs]

    def _eval_many(self, ts):
        return self.a.sample(ts)[:, self.rs, self.cs]

    def _derivative(self):
        return Slice(self.a.derivative(), self.rs, self.cs)

    def to_exprs(self):
        ea = self.a.to_exprs()
        if ea is None:
            return None
        return [list(r[self.cs]) for r in ea[self.rs]]


class Block(MatrixFunction):
    def __init__(self, blocks: Sequence[Sequence[MatrixFunction]]):
        blocks = [list(r) for r in blocks]
        heights = [r[0].shape[0] for r in blocks]
        widths = [b.shape[1] for b in blocks[0]]
        for i, r in enumerate(blocks):
            if len(r) != len(widths):
                raise DimensionMismatch("ragged block layout")
            for j, b in enumerate(r):
                if b.shape != (heights[i], widths[j]):
                    raise DimensionMismatch(
                        f"block ({i},{j}) has shape {b.shape}, expected "
                        f"{(heights[i], widths[j])}")
        self.blocks = blocks
        self.shape = (sum(heights), sum(widths))
        self.domain = _intersect(*[b.domain for r in blocks for b in r])

    def children(self):
        return tuple(b for r in self.blocks for b in r)

    def _eval(self, t):
        return np.block([[b(t) for b in r] for r in self.blocks])

    def _eval_many(self, ts):
        return np.concatenate([np.concatenate([b.sample(ts) for b in r], axis=2)
                               for r in self.blocks], axis=1)

    def _derivative(self):
        return Block([[b.derivative() for b in r] for r in self.blocks])

    def to_exprs(self):
        eb = [[b.to_exprs() for b in r] for r in self.blocks]
        if any(e is None for r in eb for e in r):
            return None
        out = []
        for r in eb:
            for k in range(len(r[0])):
                out.append([x for e in r for x in e[k]])
        return out


def invert_monotone(theta: ex.TimeExpr, target: float, lo: float, hi: float,
                    tol: float = 1e-14, max_iter: int = 200) -> float:
    """Solve ``theta(s) = target`` for increasing ``theta`` on ``[lo, hi]``.

    Safeguarded Newton: a bisection bracket is kept and Newton steps that leave
    it are replaced by bisection.
    """
    f = theta._fn()
    df = ex.differentiate(theta)._fn()
    a, b = float(lo), float(hi)
    fa, fb = f(a).real - target, f(b).real - target
    if fa > 0 or fb < 0:
        raise DomainError(f"target {target} not in theta([{lo}, {hi}])")
    if fa == 0:
        return a
    if fb == 0:
        return b
    s = 0.5 * (a + b)
    for _ in range(max_iter):
        fs = f(s).real - target
        if fs == 0:
            return s
        if fs < 0:
            a = s
        else:
            b = s
        d = df(s).real
        if d > 0:
            step = fs / d
            if abs(step) < tol * (1 + abs(s)):
                return min(max(s - step, a), b)
            s = s - step if a < s - step < b else 0.5 * (a + b)
        else:
            s = 0.5 * (a + b)
        if b - a < tol * (1 + abs(s)):
            return s
    return s


class Composed(MatrixFunction):
    """Time reparametrization ``t -> F(theta(t))``."""

    def __init__(self, a: MatrixFunction, theta: ex.TimeExpr, domain: Domain):
        self.a, self.theta = a, theta
        self.shape = a.shape
        self.domain = (float(domain[0]), float(domain[1]))
        self._th = theta._fn()

    def children(self):
        return (self.a,)

    def _eval(self, t):
        return self.a(self._th(t).real)

    def _eval_many(self, ts):
        return self.a.sample(self.theta._vfn()(ts).real)

    def _derivative(self):
        dtheta = ExprMatrix([[ex.differentiate(self.theta)]], self.domain)
        return Scaled(dtheta, Composed(self.a.derivative(), self.theta, self.domain))

    def excluded_points(self, lo, hi):
        lo_, hi_ = max(lo, self.domain[0]), min(hi, self.domain[1])
        if not (math.isfinite(lo_) and math.isfinite(hi_)):
            return []
        tlo, thi = self._th(lo_).real, self._th(hi_).real
        pts = {invert_monotone(self.theta, p, lo_, hi_)
               for p in self.a.excluded_points(tlo, thi)}
        pts.update(self.theta.excluded_points(lo_, hi_))
        return sorted(pts)

    def to_exprs(self):
        ea = self.a.to_exprs()
        if ea is None or any(e.breakpoints() for r in ea for e in r):
            return None
        return [[substitute(e, self.theta) for e in r] for r in ea]


def substitute(e: ex.TimeExpr, theta: ex.TimeExpr) -> ex.TimeExpr:
    """Replace ``t`` by ``theta`` (piecewise guards are not remapped)."""
    if isinstance(e, ex.Var):
        return theta
    if isinstance(e, ex.Const):
        return e
    if isinstance(e, ex.Unary):
        a = substitute(e.arg, theta)
        return ex.neg(a) if e.op == "neg" else ex.func(e.op, a)
    if isinstance(e, ex.Binary):
        a, b = substitute(e.left, theta), substitute(e.right, theta)
        return {"+": ex.add, "-": ex.sub, "*": ex.mul, "/": ex.div}[e.op](a, b)
    if isinstance(e, ex.Pow):
        return ex.power(substitute(e.base, theta), e.k)
    raise TypeError(type(e).__name__)


# -- factories --------------------------------------------------------------------

def matrix(entries, domain: Domain = FULL_LINE) -> ExprMatrix:
    """Build an :class:`ExprMatrix` from nested lists of strings/numbers/exprs."""
    if isinstance(entries, (str, ex.TimeExpr, int, float, complex)):
        entries = [[entries]]
    return ExprMatrix(entries, domain)


def constant(array, domain: Domain = FULL_LINE) -> ExprMatrix:
    a = np.atleast_2d(np.asarray(array, dtype=complex))
    return ExprMatrix([[ex.Const(v) for v in row] for row in a], domain)


def eye(n: int, domain: Domain = FULL_LINE) -> ExprMatrix:
    return constant(np.eye(n), domain)


def zeros(rows: int, cols: int, domain: Domain = FULL_LINE) -> ExprMatrix:
    return constant(np.zeros((rows, cols)), domain)


def block(blocks) -> MatrixFunction:
    return Block(blocks)


def diag(entries, domain: Domain = FULL_LINE) -> ExprMatrix:
    n = len(entries)
    return ExprMatrix([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)],
                      domain)


def with_domain(F: MatrixFunction, domain: Domain) -> MatrixFunction:
    if isinstance(F, ExprMatrix):
        return ExprMatrix(F.entries, domain)
    return Restricted(F, domain)


class Restricted(MatrixFunction):
    def __init__(self, a: MatrixFunction, domain: Domain):
        self.a = a
        self.shape = a.shape
        self.domain = _intersect(a.domain, domain)

    def children(self):
        return (self.a,)

    def _eval(self, t):
        return self.a(t)

    def _eval_many(self, ts):
        return self.a.sample(ts)

    def _derivative(self):
        return Restricted(self.a.derivative(), self.domain)

    def to_exprs(self):
        return self.a.to_exprs()


class CholeskyFactor(MatrixFunction):
    """Upper-triangular ``F(t)`` with ``M(t) = F(t)^H F(t)``.

    ``F' = X F`` where ``X`` is the upper triangle of ``F^{-H} M' F^{-1}`` with
    half its (real) diagonal; only the first derivative is available.
    """

    def __init__(self, M: MatrixFunction, tol: float = 0.0):
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch("Cholesky needs a square matrix function")
        self.a = M
        self.tol = tol
        self.shape = M.shape
        self.domain = M.domain

    def children(self):
        return (self.a,)

    def _eval(self, t):
        from .hermlin import cholesky
        return cholesky(self.a(t), self.tol)

    def _derivative(self):
        return _CholeskyDerivative(self)


class _CholeskyDerivative(MatrixFunction):
    def __init__(self, F: CholeskyFactor):
        self.F = F
        self.dM = F.a.derivative()
        self.shape = F.shape
        self.domain = F.domain

    def children(self):
        return (self.F, self.dM)

    def _eval(self, t):
        from .hermlin import cholesky_derivative
        return cholesky_derivative(self.F(t), self.dM(t))
