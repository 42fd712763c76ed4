"""Linear time-varying systems: transition matrices, simulation, supply, Gramian.

All ODEs are integrated with scipy's Dormand-Prince 4(5) pair (``RK45``).
Integration is split at the coefficient breakpoints so that no step straddles a
jump; inside a segment the right-hand side is evaluated with the time clamped
just inside the open segment, which keeps half-open piecewise guards from
leaking the next branch into the final stages of a step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from . import matfun as mf
from .errors import DimensionMismatch, DomainError, IntegrationFailure, NodesNotOnGrid

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10
# the local tolerance handed to RK45 is tighter so the global error meets rtol
_SAFETY = 10.0
_MIN_RTOL = 1e-13


@dataclass(frozen=True)
class LtvSystem:
    """``x' = A x + B u``, ``y = C x + D u`` on ``domain``."""

    A: mf.MatrixFunction
    B: mf.MatrixFunction
    C: mf.MatrixFunction
    D: mf.MatrixFunction
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        n = self.A.shape[0]
        m = self.B.shape[1]
        if self.A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        for name, M, shape in (("B", self.B, (n, m)), ("C", self.C, (m, n)),
                               ("D", self.D, (m, m))):
            if M.shape != shape:
                raise DimensionMismatch(f"{name} has shape {M.shape}, expected {shape}")
        lo, hi = float(self.domain[0]), float(self.domain[1])
        if not lo < hi:
            raise DomainError(f"empty domain ({lo}, {hi})")
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @classmethod
    def from_exprs(cls, A, B, C, D, domain=(-math.inf, math.inf)) -> "LtvSystem":
        """Build from nested lists of expression strings, numbers or arrays."""
        return cls(*(mf.as_matrix_function(M, domain=domain) for M in (A, B, C, D)),
                   domain=domain)

    def coefficients(self):
        return self.A, self.B, self.C, self.D

    def excluded_points(self, lo: float, hi: float) -> list[float]:
        pts: set[float] = set()
        for M in self.coefficients():
            pts.update(M.excluded_points(lo, hi))
        return sorted(pts)

    def check_interval(self, *ts: float) -> None:
        lo, hi = self.domain
        for t in ts:
            if not lo <= t <= hi:
                raise DomainError(f"t={t!r} outside system domain [{lo}, {hi}]")


# -- integrator driver -----------------------------------------------------------

def _inner_tol(rtol: float, atol: float) -> tuple[float, float]:
    return max(rtol / _SAFETY, _MIN_RTOL), max(atol / _SAFETY, 1e-300)


def _segments(t0: float, t1: float, points: Sequence[float]) -> list[tuple[float, float]]:
    lo, hi = min(t0, t1), max(t0, t1)
    inner = sorted(p for p in set(points) if lo < p < hi)
    cuts = [lo] + inner + [hi]
    segs = list(zip(cuts[:-1], cuts[1:]))
    if t1 < t0:
        segs = [(b, a) for a, b in reversed(segs)]
    return segs


def _clamp(a: float, b: float) -> Callable[[float], float]:
    lo, hi = min(a, b), max(a, b)
    hi_in = np.nextafter(hi, -np.inf)

    def clamp(t):
        return lo if t < lo else (hi_in if t >= hi else t)
    return clamp


def integrate(rhs: Callable[[float, np.ndarray], np.ndarray], t0: float, t1: float,
              y0: np.ndarray, *, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
              points: Sequence[float] = (), t_eval: Sequence[float] | None = None,
              dense: bool = False, max_step: float = np.inf,
              step_hook: Callable[[float, np.ndarray], None] | None = None):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    Returns ``(y1, Y, pieces)`` where ``Y`` holds the solution at ``t_eval``
    (``None`` if not requested) and ``pieces`` the dense-output objects per
    segment as ``(a, b, sol)`` when ``dense`` is set.
    """
    y = np.asarray(y0, dtype=complex).ravel().copy()
    r, a_ = _inner_tol(rtol, atol)
    te = None if t_eval is None else np.asarray(t_eval, dtype=float)
    Y = None if te is None else np.full((len(te), y.size), np.nan, dtype=complex)
    pieces = []
    if t0 == t1:
        if Y is not None:
            Y[te == t0] = y
        return y, Y, pieces
    for a, b in _segments(t0, t1, points):
        clamp = _clamp(a, b)

        def f(t, yy, clamp=clamp):
            return rhs(clamp(t), yy)

        need_dense = dense or te is not None
        sol = solve_ivp(f, (a, b), y, method="RK45", rtol=r, atol=a_,
                        dense_output=need_dense, max_step=max_step)
        if sol.status != 0:
            raise IntegrationFailure(f"integration failed on [{a}, {b}]: {sol.message}")
        if step_hook is not None:
            for k in range(sol.t.size):
                step_hook(sol.t[k], sol.y[:, k])
        if te is not None:
            lo, hi = min(a, b), max(a, b)
            mask = (te >= lo) & (te <= hi)
            if mask.any():
                Y[mask] = sol.sol(te[mask]).T
                Y[mask & (te == a)] = y
                Y[mask & (te == b)] = sol.y[:, -1]
        y = sol.y[:, -1].copy()
        if dense:
            pieces.append((a, b, sol.sol))
    return y, Y, pieces


# -- trajectories ------------------------------------------------------------------

def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass
class Trajectory:
    """Node samples of a state/input/output solution."""

    grid: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2 or np.any(np.diff(self.grid) <= 0):
            raise DomainError("trajectory grid must be strictly increasing with >= 2 nodes")
        self.weights = trapezoid_weights(self.grid)

    def index(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.grid - t)))
        scale = 1.0 + abs(t)
        if abs(self.grid[k] - t) > 1e-12 * scale:
            raise NodesNotOnGrid(f"t={t!r} is not a grid node")
        return k

    def to_csv(self, path) -> None:
        n, m = self.x.shape[1], self.u.shape[1]
        header = ["t"]
        for name, k in (("x", n), ("u", m), ("y", m)):
            for i in range(1, k + 1):
                header += [f"{name}{i}_re", f"{name}{i}_im"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, t in enumerate(self.grid):
                row = [repr(float(t))]
                for vec in (self.x[k], self.u[k], self.y[k]):
                    for z in vec:
                        row += [repr(float(z.real)), repr(float(z.imag))]
                w.writerow(row)


def _as_input(u, m: int, domain) -> mf.MatrixFunction:
    if u is None:
        return mf.zeros(m, 1, domain)
    U = mf.as_matrix_function(u, domain=domain)
    if U.shape == (1, m) and m != 1:
        U = U.H
    if U.shape != (m, 1):
        raise DimensionMismatch(f"input must be {m}x1, got {U.shape}")
    return U


def state_transition(sys: LtvSystem, t: float, s: float, rtol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL) -> np.ndarray:
    """``Phi(t, s)`` by integrating ``dPhi/dt = A Phi`` from ``s`` to ``t``."""
    sys.check_interval(t, s)
    n = sys.n
    if t == s:
        return np.eye(n, dtype=complex)
    A = sys.A

    def rhs(tt, y):
        return (A(tt) @ y.reshape(n, n)).ravel()

    y, _, _ = integrate(rhs, s, t, np.eye(n, dtype=complex), rtol=rtol, atol=atol,
                        points=A.excluded_points(min(s, t), max(s, t)))
    return y.reshape(n, n)


def transition_sweep(sys: LtvSystem, grid: Sequence[float], rtol: float = DEFAULT_RTOL,
                     atol: float = DEFAULT_ATOL) -> np.ndarray:
    """``Phi(t_k, t_0)`` for every node of ``grid`` from one integration."""
    grid = np.asarray(grid, dtype=float)
    sys.check_interval(grid[0], grid[-1])
    n = sys.n
    A = sys.A

    def rhs(tt, y):
        return (A(tt) @ y.reshape(n, n)).ravel()

    lo, hi = grid.min(), grid.max()
    _, Y, _ = integrate(rhs, grid[0], grid[-1], np.eye(n, dtype=complex), rtol=rtol,
                        atol=atol, points=A.excluded_points(lo, hi), t_eval=grid)
    return Y.reshape(len(grid), n, n)


def simulate(sys: LtvSystem, t0: float, x0, u, grid: Sequence[float],
             rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> Trajectory:
    """Integrate the state equation on ``grid`` (first node ``t0``) and fill outputs."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != t0:
        raise DomainError(f"first grid node {grid[0]} must equal t0={t0}")
    sys.check_interval(grid[0], grid[-1])
    n, m = sys.n, sys.m
    x0 = np.asarray(x0, dtype=complex).ravel()
    if x0.size != n:
        raise DimensionMismatch(f"x0 has {x0.size} entries, expected {n}")
    if not np.all(np.isfinite(x0)):
        raise DomainError("x0 must be finite")
    U = _as_input(u, m, sys.domain)
    A, B, C, D = sys.coefficients()

    def rhs(tt, x):
        return A(tt) @ x + B(tt) @ U(tt)[:, 0]

    pts = set(sys.excluded_points(grid[0], grid[-1]))
    pts.update(U.excluded_points(grid[0], grid[-1]))
    _, X, _ = integrate(rhs, grid[0], grid[-1], x0, rtol=rtol, atol=atol,
                        points=sorted(pts), t_eval=grid)
    us = U.sample(grid)[:, :, 0]
    ys = np.einsum("kij,kj->ki", C.sample(grid), X) + np.einsum("kij,kj->ki", D.sample(grid), us)
    return Trajectory(grid, X, us, ys)


def supply_rate(traj: Trajectory) -> np.ndarray:
    """``Re(y^H u)`` at every node."""
    return np.real(np.einsum("ki,ki->k", traj.y.conj(), traj.u))


def cumulative_supply(traj: Trajectory) -> np.ndarray:
    """Trapezoid integral of the supply rate from the first node to each node."""
    s = supply_rate(traj)
    h = np.diff(traj.grid)
    return np.concatenate([[0.0], np.cumsum(0.5 * h * (s[1:] + s[:-1]))])


def supply(traj: Trajectory, t_a: float, t_b: float) -> float:
    """Trapezoid quadrature of ``Re(y^H u)`` over ``[t_a, t_b]`` (grid nodes)."""
    i, j = traj.index(t_a), traj.index(t_b)
    cum = cumulative_supply(traj)
    return float(cum[j] - cum[i])


@dataclass(frozen=True)
class GramianResult:
    W: np.ndarray
    min_eig: float
    reachable: bool
    grid: np.ndarray
    min_eig_curve: np.ndarray


def reachability_gramian(sys: LtvSystem, t_a: float, t_b: float, nodes: int = 2,
                         tol: float = 1e-10, rtol: float = DEFAULT_RTOL,
                         atol: float = 1e-14) -> GramianResult:
    """Reachability Gramian ``W(t_b)`` with ``W(t) = int_{t_a}^t Phi(t,s) B B^H Phi(t,s)^H ds``.

    Computed from the differential Lyapunov equation ``W' = A W + W A^H + B B^H``,
    ``W(t_a) = 0``, which is the exact derivative of the integral definition.
    ``min_eig_curve`` samples ``min_eig(W(t))`` on ``nodes`` uniform nodes.
    """
    from .hermlin import herm, min_eig

    if not t_a < t_b:
        raise DomainError("t_a < t_b required")
    sys.check_interval(t_a, t_b)
    n = sys.n
    A, B = sys.A, sys.B

    def rhs(tt, w):
        W = w.reshape(n, n)
        At, Bt = A(tt), B(tt)
        return (At @ W + W @ At.conj().T + Bt @ Bt.conj().T).ravel()

    grid = np.linspace(t_a, t_b, max(int(nodes), 2))
    pts = set(A.excluded_points(t_a, t_b)) | set(B.excluded_points(t_a, t_b))
    _, Y, _ = integrate(rhs, t_a, t_b, np.zeros((n, n), dtype=complex), rtol=rtol,
                        atol=atol, points=sorted(pts), t_eval=grid)
    Ws = [herm(y.reshape(n, n)) for y in Y]
    curve = np.array([min_eig(W) for W in Ws])
    return GramianResult(Ws[-1], float(curve[-1]), bool(curve[-1] > tol), grid, curve)


def supply_ode(sys: LtvSystem, t0: float, x0, u, t1: float,
               rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """``int_{t0}^{t1} Re(y^H u) dt`` integrated alongside the state equation.

    Accurate to the integrator tolerance, independent of any sampling grid.
    """
    sys.check_interval(t0, t1)
    n, m = sys.n, sys.m
    x0 = np.asarray(x0, dtype=complex).ravel()
    if x0.size != n:
        raise DimensionMismatch(f"x0 has {x0.size} entries, expected {n}")
    U = _as_input(u, m, sys.domain)
    A, B, C, D = sys.coefficients()

    def rhs(tt, z):
        x = z[:n]
        ut = U(tt)[:, 0]
        y = C(tt) @ x + D(tt) @ ut
        return np.concatenate([A(tt) @ x + B(tt) @ ut, [np.real(np.vdot(y, ut))]])

    pts = set(sys.excluded_points(min(t0, t1), max(t0, t1)))
    pts.update(U.excluded_points(min(t0, t1), max(t0, t1)))
    z, _, _ = integrate(rhs, t0, t1, np.concatenate([x0, [0.0]]), rtol=rtol, atol=atol,
                        points=sorted(pts))
    return float(z[-1].real)
