"""KYP inequalities, storage-function checks, the Riccati equation, available storage."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matfun as mf
from .errors import (BlowUp, DimensionMismatch, DomainError,
                     DPlusDHNotUniformlyPositive, NonDifferentiablePoint)
from .hermlin import herm, min_eig, psd_check
from .ltv import (DEFAULT_ATOL, DEFAULT_RTOL, LtvSystem, Trajectory,
                  cumulative_supply, integrate)

EXCLUDE_TOL = 1e-12


@dataclass(frozen=True)
class StorageCandidate:
    """Hermitian matrix function ``Q`` inducing ``V(t, x) = x^H Q(t) x / 2``."""

    Q: mf.MatrixFunction
    Qdot: mf.MatrixFunction | None = None
    excluded: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.Q.shape[0] != self.Q.shape[1]:
            raise DimensionMismatch(f"Q must be square, got {self.Q.shape}")
        if self.Qdot is None:
            object.__setattr__(self, "Qdot", self.Q.derivative())

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def excluded_points(self, lo: float, hi: float) -> list[float]:
        if self.excluded is not None:
            return [p for p in self.excluded if lo <= p <= hi]
        return self.Q.excluded_points(lo, hi)

    def value(self, t: float, x) -> float:
        x = np.asarray(x, dtype=complex).ravel()
        return 0.5 * float(np.real(x.conj() @ self.Q(t) @ x))

    def values(self, ts, xs) -> np.ndarray:
        """``value`` at each pair of ``ts`` and rows of ``xs``."""
        xs = np.asarray(xs, dtype=complex)
        return 0.5 * np.real(np.einsum("ki,kij,kj->k", xs.conj(), self.Q.sample(ts), xs))


def as_storage(Q, domain=(-math.inf, math.inf)) -> StorageCandidate:
    if isinstance(Q, StorageCandidate):
        return Q
    return StorageCandidate(mf.as_matrix_function(Q, domain=domain))


def _check_not_excluded(t: float, pts: Sequence[float]) -> None:
    for p in pts:
        if abs(t - p) <= EXCLUDE_TOL * (1 + abs(p)):
            raise NonDifferentiablePoint(t)


def kyp_matrix(sys: LtvSystem, Q, t: float, *, check_excluded: bool = True) -> np.ndarray:
    """``[[-A^H Q - Q A - Q', C^H - Q B], [C - B^H Q, D + D^H]]`` at ``t``."""
    Q = as_storage(Q, sys.domain)
    if Q.n != sys.n:
        raise DimensionMismatch(f"Q is {Q.n}x{Q.n}, system has n={sys.n}")
    if check_excluded:
        _check_not_excluded(t, Q.excluded_points(t - 1, t + 1))
    A, B, C, D = (M(t) for M in sys.coefficients())
    q, dq = Q.Q(t), Q.Qdot(t)
    tl = -A.conj().T @ q - q @ A - dq
    tr = C.conj().T - q @ B
    K = np.block([[tl, tr], [tr.conj().T, D + D.conj().T]])
    return 0.5 * (K + K.conj().T)


def kyp_matrices(sys: LtvSystem, Q, grid) -> np.ndarray:
    """KYP matrices at every node of ``grid``, stacked along the first axis."""
    Q = as_storage(Q, sys.domain)
    if Q.n != sys.n:
        raise DimensionMismatch(f"Q is {Q.n}x{Q.n}, system has n={sys.n}")
    A, B, C, D = (M.sample(grid) for M in sys.coefficients())
    q, dq = Q.Q.sample(grid), Q.Qdot.sample(grid)

    def ct(X):
        return X.conj().transpose(0, 2, 1)

    tl = -ct(A) @ q - q @ A - dq
    tr = ct(C) - q @ B
    K = np.concatenate([np.concatenate([tl, tr], axis=2),
                        np.concatenate([ct(tr), D + ct(D)], axis=2)], axis=1)
    return 0.5 * (K + ct(K))


@dataclass
class KypReport:
    grid: np.ndarray
    kyp_min_eig: np.ndarray
    thresholds: np.ndarray
    holds: bool
    worst_node: tuple[float, float]
    skipped: list[float] = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "min_eig"])
            for t, v in zip(self.grid, self.kyp_min_eig):
                w.writerow([repr(float(t)), repr(float(v))])


def _drop_excluded(grid: np.ndarray, pts: Sequence[float]) -> tuple[np.ndarray, list[float]]:
    keep = np.ones(grid.size, dtype=bool)
    for p in pts:
        keep &= np.abs(grid - p) > EXCLUDE_TOL * (1 + abs(p))
    return grid[keep], grid[~keep].tolist()


def kyp_check(sys: LtvSystem, Q, grid: Sequence[float], tol: float = 1e-9) -> KypReport:
    """Nodewise PSD test of the KYP matrix; excluded points are skipped."""
    Q = as_storage(Q, sys.domain)
    grid = np.asarray(grid, dtype=float)
    sys.check_interval(grid.min(), grid.max())
    pts = set(Q.excluded_points(grid.min(), grid.max()))
    pts.update(Q.Qdot.excluded_points(grid.min(), grid.max()))
    grid, skipped = _drop_excluded(grid, pts)
    mins = np.empty(grid.size)
    thr = np.empty(grid.size)
    ok = True
    if grid.size:
        lam = np.linalg.eigvalsh(kyp_matrices(sys, Q, grid))
        mins[:] = lam[:, 0]
        thr[:] = -tol * (1.0 + np.abs(lam).max(axis=1))
        ok = bool(np.all(mins >= thr))
    k = int(np.argmin(mins - thr)) if grid.size else 0
    worst = (float(grid[k]), float(mins[k])) if grid.size else (math.nan, math.nan)
    return KypReport(grid, mins, thr, bool(ok), worst, skipped)


@dataclass(frozen=True)
class IntegralKypResult:
    holds: bool
    min_eig: float
    matrix: np.ndarray


def integral_kyp_matrix(sys: LtvSystem, Q, t_a: float, t_b: float,
                        nodes: int = 20) -> np.ndarray:
    """Block matrix of integrated coefficients with ``Q(t_a) - Q(t_b)`` top-left.

    Each integral uses ``nodes``-point Gauss-Legendre rules on the pieces
    between coefficient breakpoints.
    """
    Q = as_storage(Q, sys.domain)
    if t_b < t_a:
        raise DomainError("t_a <= t_b required")
    sys.check_interval(t_a, t_b)
    n, m = sys.n, sys.m
    acc = np.zeros((n + m, n + m), dtype=complex)
    if t_b > t_a:
        pts = sorted(set(sys.excluded_points(t_a, t_b)) | set(Q.excluded_points(t_a, t_b)))
        cuts = [t_a] + [p for p in pts if t_a < p < t_b] + [t_b]
        xg, wg = np.polynomial.legendre.leggauss(max(int(nodes), 1))
        for a, b in zip(cuts[:-1], cuts[1:]):
            for xi, wi in zip(xg, wg):
                t = 0.5 * (a + b) + 0.5 * (b - a) * xi
                A, B, C, D = (M(t) for M in sys.coefficients())
                q = Q.Q(t)
                tr = C.conj().T - q @ B
                blk = np.block([[-A.conj().T @ q - q @ A, tr],
                                [tr.conj().T, D + D.conj().T]])
                acc += 0.5 * (b - a) * wi * blk
    acc[:n, :n] += Q.Q(t_a) - Q.Q(t_b)
    return 0.5 * (acc + acc.conj().T)


def integral_kyp_check(sys: LtvSystem, Q, t_a: float, t_b: float, nodes: int = 20,
                       tol: float = 1e-9) -> IntegralKypResult:
    M = integral_kyp_matrix(sys, Q, t_a, t_b, nodes)
    res = psd_check(M, tol)
    return IntegralKypResult(res.psd, res.min_eig, M)


@dataclass(frozen=True)
class DissipationResult:
    passive_on_trajectory: bool
    worst_violation: float
    worst_pair: tuple[float, float]


def dissipation_check(traj: Trajectory, Q, tol: float = 1e-9) -> DissipationResult:
    """Worst ``V(t1) - V(t0) - int_{t0}^{t1} Re(y^H u)`` over node pairs ``t0 <= t1``.

    One pass with a running minimum of ``V - S`` (``S`` the cumulative supply).
    """
    Q = as_storage(Q)
    V = Q.values(traj.grid, traj.x)
    g = V - cumulative_supply(traj)
    worst, pair = -math.inf, (traj.grid[0], traj.grid[0])
    run_min, arg = math.inf, 0
    for j in range(g.size):
        if g[j] < run_min:
            run_min, arg = g[j], j
        if g[j] - run_min > worst:
            worst, pair = g[j] - run_min, (traj.grid[arg], traj.grid[j])
    return DissipationResult(bool(worst <= tol), float(worst),
                             (float(pair[0]), float(pair[1])))


# -- Riccati equation ---------------------------------------------------------------

def check_feedthrough(sys: LtvSystem, t_a: float, t_b: float, nodes: int = 201,
                      c: float = 1e-10) -> None:
    """Raise :class:`DPlusDHNotUniformlyPositive` unless ``D + D^H > c I`` at the
    sampled nodes and the breakpoints of ``D``."""
    ts = set(np.linspace(t_a, t_b, nodes).tolist())
    ts.update(sys.D.excluded_points(t_a, t_b))
    for t in sorted(ts):
        D = sys.D(t)
        lam = min_eig(D + D.conj().T)
        if not lam > c:
            raise DPlusDHNotUniformlyPositive(t, lam)


class _Escape(Exception):
    def __init__(self, t):
        self.t = t


def riccati_rhs(sys: LtvSystem, t: float, Q: np.ndarray) -> np.ndarray:
    """``-A^H Q - Q A - (C^H - Q B)(D + D^H)^{-1}(C - B^H Q)``."""
    A, B, C, D = (M(t) for M in sys.coefficients())
    Q = 0.5 * (Q + Q.conj().T)
    L = C.conj().T - Q @ B
    out = -A.conj().T @ Q - Q @ A - L @ np.linalg.solve(D + D.conj().T, L.conj().T)
    return 0.5 * (out + out.conj().T)


class RiccatiSolution(StorageCandidate):
    """Dense Riccati solution usable wherever a StorageCandidate is accepted."""

    pieces: list
    t_start: float
    t_end: float


def rde_integrate(sys: LtvSystem, t_end: float, Q_end, t_start: float,
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  blowup: float = 1e12) -> RiccatiSolution:
    """Integrate the Riccati differential equation backward from ``Q(t_end) = Q_end``."""
    if not t_start < t_end:
        raise DomainError("t_start < t_end required")
    sys.check_interval(t_start, t_end)
    n = sys.n
    Q_end = herm(np.atleast_2d(np.asarray(Q_end, dtype=complex)), name="Q_end")
    if Q_end.shape != (n, n):
        raise DimensionMismatch(f"Q_end must be {n}x{n}")
    check_feedthrough(sys, t_start, t_end)

    def rhs(t, q):
        Q = q.reshape(n, n)
        if not np.all(np.isfinite(Q)) or np.abs(Q).max() > blowup:
            raise _Escape(t)
        return riccati_rhs(sys, t, Q).ravel()

    try:
        _, _, pieces = integrate(rhs, t_end, t_start, Q_end, rtol=rtol, atol=atol,
                                 points=sys.excluded_points(t_start, t_end), dense=True)
    except _Escape as exc:
        raise BlowUp(exc.t) from None

    def value(t):
        for a, b, sol in pieces:
            if min(a, b) <= t <= max(a, b):
                Q = sol(t).reshape(n, n)
                return 0.5 * (Q + Q.conj().T)
        raise DomainError(f"t={t!r} outside [{t_start}, {t_end}]")

    dom = (t_start, t_end)
    breaks = sys.excluded_points(t_start, t_end)
    Qf = mf.Callable(value, (n, n), dom, points=breaks, name="riccati")
    dQ = mf.Callable(lambda t: riccati_rhs(sys, t, value(t)), (n, n), dom,
                     points=breaks, name="riccati'")
    Qf._d = dQ
    sol = RiccatiSolution(Qf, dQ, tuple(breaks))
    object.__setattr__(sol, "pieces", pieces)
    object.__setattr__(sol, "t_start", t_start)
    object.__setattr__(sol, "t_end", t_end)
    return sol


def available_storage(sys: LtvSystem, t: float, x, horizon: float,
                      rtol: float = DEFAULT_RTOL) -> float:
    """``x^H Q_a(t) x / 2`` with ``Q_a`` the Riccati solution vanishing at ``t + horizon``."""
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    sol = rde_integrate(sys, t + horizon, np.zeros((sys.n, sys.n)), t, rtol)
    return sol.value(t, x)


@dataclass(frozen=True)
class ContinuationReport:
    horizons: tuple[float, ...]
    values: tuple[float, ...]
    q_changes: tuple[float, ...]


def available_storage_continuation(sys: LtvSystem, t: float, x,
                                   horizons: Sequence[float],
                                   rtol: float = DEFAULT_RTOL) -> ContinuationReport:
    """Available storage over increasing horizons with ``||Q(t)||`` changes between them."""
    horizons = sorted(float(h) for h in horizons)
    values, changes, prev = [], [], None
    for h in horizons:
        sol = rde_integrate(sys, t + h, np.zeros((sys.n, sys.n)), t, rtol)
        Qt = sol.Q(t)
        values.append(sol.value(t, x))
        changes.append(math.nan if prev is None else float(np.linalg.norm(Qt - prev, 2)))
        prev = Qt
    return ContinuationReport(tuple(horizons), tuple(values), tuple(changes))
