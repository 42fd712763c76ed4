"""Port-Hamiltonian representations of LTV systems.

A representation is the tuple ``(Q, K, J, R, G, P, S, N)`` with

* ``A = (J - R) Q - K``, ``B = G - P``, ``C = (G + P)^H Q``, ``D = S - N``,
* ``J``, ``N`` skew-Hermitian, ``W = [[R, P], [P^H, S]]`` positive semidefinite,
* ``Q`` Hermitian PSD with ``Q K + K^H Q = Q'``,

and Hamiltonian ``H(t, x) = x^H Q(t) x / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np
import scipy.linalg

from . import expr as ex
from . import matfun as mf
from .dissipativity import StorageCandidate, as_storage, kyp_check
from .errors import (A12NotZero, C2NotZero, DimensionMismatch,
                     EigenvalueCrossingUnresolved, InvariantViolation,
                     NotAKypSolution, RankIncreaseDetected, RankNotConstant)
from .hermlin import herm_eig, psd_check
from .ltv import LtvSystem, Trajectory

INVARIANT_TOL = 1e-9


@dataclass(frozen=True)
class PhRepresentation:
    Q: mf.MatrixFunction
    K: mf.MatrixFunction
    J: mf.MatrixFunction
    R: mf.MatrixFunction
    G: mf.MatrixFunction
    P: mf.MatrixFunction
    S: mf.MatrixFunction
    N: mf.MatrixFunction
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        n, m = self.G.shape
        for f in ("Q", "K", "J", "R"):
            if getattr(self, f).shape != (n, n):
                raise DimensionMismatch(f"{f} must be {n}x{n}")
        if self.P.shape != (n, m):
            raise DimensionMismatch(f"P must be {n}x{m}")
        for f in ("S", "N"):
            if getattr(self, f).shape != (m, m):
                raise DimensionMismatch(f"{f} must be {m}x{m}")

    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[1]

    @property
    def W(self) -> mf.MatrixFunction:
        return mf.block([[self.R, self.P], [self.P.H, self.S]])

    def coefficients(self) -> dict[str, mf.MatrixFunction]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "domain"}

    def hamiltonian(self, t: float, x) -> float:
        x = np.asarray(x, dtype=complex).ravel()
        return 0.5 * float(np.real(x.conj() @ self.Q(t) @ x))

    def invariant_residuals(self, grid: Sequence[float]) -> dict[str, tuple[float, float]]:
        """Worst relative residual and its node for each structural invariant.

        PSD invariants report ``max(0, -min_eig) / (1 + ||M||)``.
        """
        dQ = self.Q.derivative()
        W = self.W
        worst: dict[str, tuple[float, float]] = {}

        def upd(name, t, r):
            if name not in worst or r > worst[name][1]:
                worst[name] = (float(t), float(r))

        for t in grid:
            J, N, Q, K = self.J(t), self.N(t), self.Q(t), self.K(t)
            upd("J skew-Hermitian", t, np.linalg.norm(J + J.conj().T) / (1 + np.linalg.norm(J)))
            upd("N skew-Hermitian", t, np.linalg.norm(N + N.conj().T) / (1 + np.linalg.norm(N)))
            upd("Q Hermitian", t, np.linalg.norm(Q - Q.conj().T) / (1 + np.linalg.norm(Q)))
            for name, M in (("Q PSD", Q), ("W PSD", W(t))):
                lam = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
                upd(name, t, max(0.0, -lam[0]) / (1 + np.abs(lam).max()))
            lyap = Q @ K + K.conj().T @ Q - dQ(t)
            upd("QK + K^H Q = Q'", t, np.linalg.norm(lyap) / (1 + np.linalg.norm(Q) + np.linalg.norm(K)))
        return worst

    def validate(self, grid: Sequence[float], tol: float = INVARIANT_TOL) -> None:
        for name, (t, r) in self.invariant_residuals(grid).items():
            if r > tol:
                raise InvariantViolation(name, t, r)


def assemble_system(ph: PhRepresentation, grid: Sequence[float] | None = None,
                    tol: float = INVARIANT_TOL) -> LtvSystem:
    """``A = (J-R)Q - K``, ``B = G - P``, ``C = (G+P)^H Q``, ``D = S - N``."""
    if grid is not None:
        ph.validate(grid, tol)
    A = (ph.J - ph.R) @ ph.Q - ph.K
    B = ph.G - ph.P
    C = (ph.G + ph.P).H @ ph.Q
    D = ph.S - ph.N
    return LtvSystem(A, B, C, D, ph.domain)


# -- null space decomposition ------------------------------------------------------

def _polar(M: np.ndarray) -> np.ndarray:
    U, _ = scipy.linalg.polar(M)
    return U


def _rank(lam: np.ndarray, rank_tol: float) -> int:
    scale = 1.0 + (np.abs(lam).max() if lam.size else 0.0)
    return int(np.sum(lam >= rank_tol * scale))


def _anchor_basis(P: np.ndarray, r: int) -> np.ndarray:
    """Unitary ``[U1 U2]`` with ``U1`` spanning ``range(P)``; columns picked by
    pivoted QR so that coordinate-aligned ranges give permutation matrices."""
    n = P.shape[0]
    Pk = np.eye(n) - P
    parts = []
    for proj, k in ((P, r), (Pk, n - r)):
        if k:
            _, _, piv = scipy.linalg.qr(proj, pivoting=True)
            parts.append(_thin_polar(proj[:, np.sort(piv[:k])]))
    return np.hstack(parts) if parts else np.zeros((0, 0), dtype=complex)


def _thin_polar(M: np.ndarray) -> np.ndarray:
    """Orthonormal factor of the polar decomposition of a tall full-rank ``M``."""
    U, _, Vh = np.linalg.svd(M, full_matrices=False)
    return U @ Vh


class RangeAlignedUnitary(mf.MatrixFunction):
    """Pointwise unitary ``U(t) = [U1 U2]`` with ``U1`` spanning ``range Q(t)``.

    ``U1 = polar(P(t) U1(t0))``, ``U2 = polar((I - P(t)) U2(t0))`` where
    ``P`` is the orthogonal projector onto the range of ``Q``; this is smooth
    whenever ``Q`` is and has constant rank.  ``P' = (I-P) Q' Q^+ + Q^+ Q' (I-P)``.
    """

    def __init__(self, Q: mf.MatrixFunction, U0: np.ndarray, r: int):
        self.Qf = Q
        self.dQ = Q.derivative()
        self.U0 = np.asarray(U0, dtype=complex)
        self.r = r
        self.shape = Q.shape
        self.domain = Q.domain

    def children(self):
        return (self.Qf,)

    def _proj(self, t):
        lam, V = herm_eig(self.Qf(t))
        n = lam.size
        Vr = V[:, n - self.r:]
        lr = lam[n - self.r:]
        P = Vr @ Vr.conj().T
        Qp = (Vr / lr) @ Vr.conj().T
        return P, Qp

    def _parts(self, t):
        n, r = self.shape[0], self.r
        P, Qp = self._proj(t)
        out = []
        for proj, E in ((P, self.U0[:, :r]), (np.eye(n) - P, self.U0[:, r:])):
            M = proj @ E
            out.append((M, E))
        return P, Qp, out

    def _eval(self, t):
        if self.r in (0, self.shape[0]):
            return self.U0
        _, _, parts = self._parts(t)
        cols = []
        for M, _ in parts:
            s = np.linalg.svd(M, compute_uv=False)
            if s[-1] < 1e-3:
                raise EigenvalueCrossingUnresolved(t, "range of Q rotated too far from the anchor")
            cols.append(_thin_polar(M))
        return np.hstack(cols)

    def _derivative(self):
        return _RangeAlignedDerivative(self)


class _RangeAlignedDerivative(mf.MatrixFunction):
    def __init__(self, U: RangeAlignedUnitary):
        self.U = U
        self.shape = U.shape
        self.domain = U.domain

    def children(self):
        return (self.U,)

    def _eval(self, t):
        U = self.U
        n = U.shape[0]
        if U.r in (0, n):
            return np.zeros(U.shape, dtype=complex)
        P, Qp, parts = U._parts(t)
        dQ = U.dQ(t)
        Pk = np.eye(n) - P
        dP = Pk @ dQ @ Qp + Qp @ dQ @ Pk
        cols = []
        for sgn, (M, E) in zip((1, -1), parts):
            dM = sgn * dP @ E
            H = M.conj().T @ M
            S = scipy.linalg.sqrtm(H)
            S = 0.5 * (S + S.conj().T)
            dH = dM.conj().T @ M + M.conj().T @ dM
            dS = scipy.linalg.solve_sylvester(S, S, dH)
            Sinv = np.linalg.inv(S)
            cols.append(dM @ Sinv - M @ Sinv @ dS @ Sinv)
        return np.hstack(cols)


def _structural_permutation(Q: mf.MatrixFunction, r: int) -> np.ndarray | None:
    """Permutation ``[range axes, kernel axes]`` when ``Q`` has exactly ``n - r``
    identically zero rows/columns (then the range is constant); else ``None``."""
    n = Q.shape[0]
    if r in (0, n):
        return np.eye(n)
    e = Q.to_exprs()
    if e is None:
        return None
    zero = [i for i in range(n)
            if all(isinstance(e[i][j], ex.Const) and e[i][j].value == 0 and
                   isinstance(e[j][i], ex.Const) and e[j][i].value == 0 for j in range(n))]
    if len(zero) != n - r:
        return None
    order = [i for i in range(n) if i not in zero] + zero
    return np.eye(n)[:, order]


@dataclass
class NullSpaceResult:
    grid: np.ndarray
    ranks: np.ndarray
    U_nodes: np.ndarray
    Q_tilde: np.ndarray
    U: mf.MatrixFunction

    @property
    def constant_rank(self) -> bool:
        return bool(np.all(self.ranks == self.ranks[0]))


def null_space_decomposition(Q, grid: Sequence[float], rank_tol: float = 1e-9) -> NullSpaceResult:
    """Pointwise unitary ``U`` with ``U^H Q U = diag(Q11, 0)``, ``Q11 > 0``.

    Eigenbases are aligned node to node (orthogonal Procrustes within the
    range and kernel blocks, which reduces to greedy matching plus phase
    rotation for simple eigenvalues).  The rank must be weakly decreasing.
    With constant rank ``U`` is a smooth :class:`RangeAlignedUnitary`,
    otherwise a piecewise-constant interpolant of the node bases.
    """
    Qs = as_storage(Q)
    grid = np.asarray(grid, dtype=float)
    n = Qs.n
    ranks = np.empty(grid.size, dtype=int)
    bases = []
    prev = None
    for k, t in enumerate(grid):
        lam, V = herm_eig(Qs.Q(t))
        r = _rank(lam, rank_tol)
        ranks[k] = r
        if k and r > ranks[k - 1]:
            raise RankIncreaseDetected(float(t), int(ranks[k - 1]), r)
        Vr, Vk = V[:, n - r:], V[:, :n - r]
        if prev is None or r != ranks[k - 1]:
            P = Vr @ Vr.conj().T
            cur = _anchor_basis(P, r)
        else:
            blocks = []
            for Vn, Vp in ((Vr, prev[:, :r]), (Vk, prev[:, r:])):
                if Vn.shape[1] == 0:
                    blocks.append(Vn)
                    continue
                O = Vn.conj().T @ Vp
                if np.linalg.svd(O, compute_uv=False)[-1] < 0.5:
                    raise EigenvalueCrossingUnresolved(float(t), "grid too coarse for alignment")
                blocks.append(Vn @ _polar(O))
            cur = np.hstack(blocks)
        bases.append(cur)
        prev = cur
    if np.all(ranks == ranks[0]):
        r = int(ranks[0])
        perm = _structural_permutation(Qs.Q, r)
        if perm is not None:
            U = mf.constant(perm, Qs.Q.domain)
        else:
            U0 = np.eye(n, dtype=complex) if r in (0, n) else bases[0]
            U = RangeAlignedUnitary(Qs.Q, U0, r)
        bases = [U(t) for t in grid]
    else:
        stack = np.array(bases)

        def pc(t):
            k = int(np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 1))
            return stack[k]
        U = mf.Callable(pc, (n, n), Qs.Q.domain, points=grid[1:-1], name="U")
    Un = np.array(bases)
    Qt = np.array([B.conj().T @ Qs.Q(t) @ B for B, t in zip(Un, grid)])
    return NullSpaceResult(grid, ranks, Un, Qt, U)


# -- canonical representation ---------------------------------------------------------

@dataclass
class CanonicalPh:
    """pH representation in the coordinates ``x_tilde = U^H x``."""

    ph: PhRepresentation
    U: mf.MatrixFunction
    r: int

    def in_original_coordinates(self) -> PhRepresentation:
        from .transforms import ph_state_transform
        return ph_state_transform(self.ph, self.U.H)


def _zero(r, c, dom):
    return mf.zeros(r, c, dom)


def canonical_ph(sys: LtvSystem, Q, grid: Sequence[float], tol: float = 1e-9,
                 rank_tol: float = 1e-9, kernel_tol: float = 1e-8) -> CanonicalPh:
    """Canonical pH representation induced by a KYP solution ``Q``.

    In the null-space coordinates ``Q = diag(Q11, 0)`` the coefficients are
    ``J11 = (A11 Q11^-1 - Q11^-1 A11^H)/2``,
    ``R11 = -(A11 Q11^-1 + Q11^-1 A11^H + Q11^-1 Q11' Q11^-1)/2``,
    ``K = [[Q11^-1 Q11'/2, 0], [-A21, -A22]]``,
    ``G = [(Q11^-1 C1^H + B1)/2; B2]``, ``P = [(Q11^-1 C1^H - B1)/2; 0]``,
    ``S = (D + D^H)/2``, ``N = (D^H - D)/2``; the remaining blocks vanish.
    """
    from .transforms import state_transform

    Qs = as_storage(Q, sys.domain)
    grid = np.asarray(grid, dtype=float)
    rep = kyp_check(sys, Qs, grid, tol)
    if not rep.holds:
        raise NotAKypSolution(*rep.worst_node)
    ns = null_space_decomposition(Qs, grid, rank_tol)
    if not ns.constant_rank:
        raise RankNotConstant(ns.ranks.tolist())
    r, n, m = int(ns.ranks[0]), sys.n, sys.m
    U = ns.U
    ts = state_transform(sys, U, Zinv=U.H)
    Qt = U.H @ Qs.Q @ U
    dom = sys.domain
    A, B, C, D = ts.A, ts.B, ts.C, ts.D
    for t in grid:
        a12 = np.linalg.norm(A(t)[:r, r:]) if 0 < r < n else 0.0
        c2 = np.linalg.norm(C(t)[:, r:]) if r < n else 0.0
        scale = 1 + np.linalg.norm(A(t)) + np.linalg.norm(C(t))
        if a12 > kernel_tol * scale:
            raise A12NotZero(float(t), a12)
        if c2 > kernel_tol * scale:
            raise C2NotZero(float(t), c2)

    S = 0.5 * (D + D.H)
    N = 0.5 * (D.H - D)
    if r == 0:
        Z = _zero(n, n, dom)
        ph = PhRepresentation(_zero(n, n, dom), -A, Z, Z, B, _zero(n, m, dom), S, N, dom)
        return CanonicalPh(ph, U, 0)

    Q11 = Qt[:r, :r]
    Qi = Q11.inv()
    dQ11 = Q11.derivative()
    A11, B1, C1 = A[:r, :r], B[:r, :], C[:, :r]
    J11 = 0.5 * (A11 @ Qi - Qi @ A11.H)
    R11 = -0.5 * (A11 @ Qi + Qi @ A11.H + Qi @ dQ11 @ Qi)
    K11 = 0.5 * (Qi @ dQ11)
    G1 = 0.5 * (Qi @ C1.H + B1)
    P1 = 0.5 * (Qi @ C1.H - B1)
    if r == n:
        ph = PhRepresentation(Qt, K11, J11, R11, G1, P1, S, N, dom)
        return CanonicalPh(ph, U, r)
    k = n - r
    Qb = mf.block([[Q11, _zero(r, k, dom)], [_zero(k, r, dom), _zero(k, k, dom)]])
    Kb = mf.block([[K11, _zero(r, k, dom)], [-A[r:, :r], -A[r:, r:]]])

    def pad(X11):
        return mf.block([[X11, _zero(r, k, dom)], [_zero(k, r, dom), _zero(k, k, dom)]])

    G = mf.block([[G1], [B[r:, :]]])
    P = mf.block([[P1], [_zero(k, m, dom)]])
    ph = PhRepresentation(Qb, Kb, pad(J11), pad(R11), G, P, S, N, dom)
    return CanonicalPh(ph, U, r)


def kyp_to_ph(sys: LtvSystem, Q, grid: Sequence[float], **kw) -> CanonicalPh:
    """pH representation from a KYP solution (validates, then the canonical choice)."""
    return canonical_ph(sys, Q, grid, **kw)


# -- power balance ---------------------------------------------------------------------

@dataclass(frozen=True)
class PowerBalance:
    max_residual: float
    dissipation_integral: float
    residuals: np.ndarray


def power_balance_residual(ph: PhRepresentation, traj: Trajectory) -> PowerBalance:
    """Per-interval residual of ``dH/dt = -[Qx;u]^H W [Qx;u] + Re(y^H u)``.

    Both integrals use the trapezoid rule between consecutive nodes.
    """
    x, u, y = traj.x, traj.u, traj.y
    Qx = np.einsum("kij,kj->ki", ph.Q.sample(traj.grid), x)
    Hs = 0.5 * np.real(np.einsum("ki,ki->k", x.conj(), Qx))
    z = np.concatenate([Qx, u], axis=1)
    ds = np.real(np.einsum("ki,kij,kj->k", z.conj(), ph.W.sample(traj.grid), z))
    ss = np.real(np.einsum("ki,ki->k", y.conj(), u))
    h = np.diff(traj.grid)
    diss = 0.5 * h * (ds[1:] + ds[:-1])
    sup = 0.5 * h * (ss[1:] + ss[:-1])
    res = np.abs(np.diff(Hs) + diss - sup)
    return PowerBalance(float(res.max()), float(diss.sum()), res)


# -- constant Hamiltonian --------------------------------------------------------------

@dataclass
class AutonomizedPh:
    Z: mf.MatrixFunction
    ph: PhRepresentation
    r: int


def autonomize_hamiltonian(ph: PhRepresentation, grid: Sequence[float],
                           rank_tol: float = 1e-9) -> AutonomizedPh:
    """State transformation ``Z = U diag(V11^-1, I)`` with ``Q11 = V11^H V11``
    (Cholesky), after which ``Z^H Q Z = diag(I_r, 0)``."""
    from .transforms import ph_state_transform

    ns = null_space_decomposition(StorageCandidate(ph.Q), grid, rank_tol)
    if not ns.constant_rank:
        raise RankNotConstant(ns.ranks.tolist())
    r, n, dom = int(ns.ranks[0]), ph.n, ph.domain
    U = ns.U
    if r == 0:
        Z = U
    else:
        Qt = U.H @ ph.Q @ U
        Vinv = mf.CholeskyFactor(Qt[:r, :r]).inv()
        if r < n:
            Vinv = mf.block([[Vinv, _zero(r, n - r, dom)],
                             [_zero(n - r, r, dom), mf.eye(n - r, dom)]])
        Z = U @ Vinv
    return AutonomizedPh(Z, ph_state_transform(ph, Z), r)


# -- random generator for property tests ---------------------------------------------

def _rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_ph(rng: np.random.Generator, n: int, m: int, rank: int | None = None,
              domain=(0.0, 1.0), eps: float = 0.1, complex_: bool = True) -> PhRepresentation:
    """Random valid representation.

    ``W = M(t)^H M(t) + eps I`` with ``M`` affine in ``sin t``, ``J``
    skew-Hermitian, ``Q11 = L^H L`` with ``L`` upper triangular and positive
    diagonal, ``K11 = Q11^-1 Q11' / 2`` and random ``K21``, ``K22`` for the
    kernel part.
    """
    r = n if rank is None else rank
    rand = (lambda *s: _rand_c(rng, *s)) if complex_ else (lambda *s: rng.standard_normal(s))
    dom = domain
    s = ex.func("sin", ex.T)
    c = ex.func("cos", ex.T)

    def affine(M0, M1, f):
        return mf.constant(M0, dom) + mf.constant(M1, dom) * f

    M = affine(0.5 * rand(n + m, n + m), 0.5 * rand(n + m, n + m), s)
    W = M.H @ M + eps * mf.eye(n + m, dom)
    J0, J1 = rand(n, n), rand(n, n)
    J = affine(J0 - J0.conj().T, J1 - J1.conj().T, c) * 0.5
    N0 = rand(m, m)
    N = mf.constant(0.5 * (N0 - N0.conj().T), dom)
    G = affine(rand(n, m), 0.5 * rand(n, m), s)

    L = []
    for i in range(r):
        row = []
        for j in range(r):
            if j < i:
                row.append(ex.ZERO)
            elif j == i:
                a, b = rng.uniform(-0.5, 0.5, 2)
                row.append(ex.func("exp", ex.const(a) + ex.const(b) * s))
            else:
                a, b = rng.uniform(-0.5, 0.5, 2)
                row.append(ex.const(a) + ex.const(b) * ex.T)
        L.append(row)
    if r:
        Lf = mf.matrix(L, dom)
        Q11 = Lf.H @ Lf
        K11 = 0.5 * (Q11.inv() @ Q11.derivative())
    k = n - r
    if k == 0:
        Q, K = Q11, K11
    else:
        Z = lambda a, b: mf.zeros(a, b, dom)  # noqa: E731
        if r:
            Q = mf.block([[Q11, Z(r, k)], [Z(k, r), Z(k, k)]])
            K = mf.block([[K11, Z(r, k)],
                          [mf.constant(rand(k, r), dom), mf.constant(rand(k, k), dom)]])
        else:
            Q, K = Z(n, n), mf.constant(rand(n, n), dom)
    return PhRepresentation(Q, K, J, W[:n, :n], G, W[:n, n:], W[n:, n:], N, dom)
