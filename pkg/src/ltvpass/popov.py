"""Galerkin discretization of the Popov operator and the transfer operator.

Inputs are piecewise constant on ``N`` uniform cells of ``[t_a, t_b]`` with
midpoints ``t_i``.  The Gram matrix ``G`` has blocks

* ``h C(t_i) Phi(t_i, t_j) B(t_j)`` for ``i > j`` and the Hermitian transpose
  above the diagonal,
* ``(D + D^H)(t_i) + h sym(C B)(t_i)`` on the diagonal,

so that ``h/2 * u^H G u`` approximates the supply from the zero state.
Restricting ``G`` to a run of consecutive cells gives the Gram matrix of the
corresponding subinterval, hence PSD of ``G`` covers every cell-aligned
subinterval at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import matfun as mf
from .errors import DomainError
from .hermlin import herm_eig, min_eig
from .ltv import (DEFAULT_RTOL, LtvSystem, _as_input, simulate, supply_ode,
                  transition_sweep)


@dataclass
class PopovGram:
    grid: np.ndarray          # cell midpoints
    h: float
    m: int
    matrix: np.ndarray
    dd_min_eig: np.ndarray    # min eigenvalue of D + D^H at each midpoint
    kernel: tuple[np.ndarray, np.ndarray]  # C(t_i) Phi(t_i, t_a), Phi(t_j, t_a)^-1 B(t_j)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.grid.size, self.h)

    def dump(self, path) -> None:
        """Row-major text dump, one row per line as ``re im`` pairs."""
        with open(path, "w") as fh:
            for row in self.matrix:
                fh.write(" ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n")


def popov_gram(sys: LtvSystem, t_a: float, t_b: float, N: int,
               rtol: float = DEFAULT_RTOL) -> PopovGram:
    if N < 2:
        raise DomainError("N >= 2 required")
    if not t_a < t_b:
        raise DomainError("t_a < t_b required")
    sys.check_interval(t_a, t_b)
    m = sys.m
    h = (t_b - t_a) / N
    mids = t_a + (np.arange(N) + 0.5) * h
    Phi = transition_sweep(sys, np.concatenate([[t_a], mids]), rtol)[1:]
    Cs, Bs, Ds = sys.C.sample(mids), sys.B.sample(mids), sys.D.sample(mids)
    left = np.einsum("kij,kjl->kil", Cs, Phi)
    right = np.array([np.linalg.solve(P, B) for P, B in zip(Phi, Bs)])
    K = h * np.einsum("iab,jbc->ijac", left, right)       # blocks (i, j)
    lower = np.tril(np.ones((N, N), dtype=bool), -1)
    Gb = np.zeros((N, N, m, m), dtype=complex)
    Gb[lower] = K[lower]
    Gb = Gb + Gb.transpose(1, 0, 3, 2).conj()
    CB = np.einsum("kij,kjl->kil", Cs, Bs)
    DD = Ds + Ds.conj().transpose(0, 2, 1)
    idx = np.arange(N)
    Gb[idx, idx] = DD + 0.5 * h * (CB + CB.conj().transpose(0, 2, 1))
    M = Gb.transpose(0, 2, 1, 3).reshape(N * m, N * m)
    M = 0.5 * (M + M.conj().T)
    dd = np.array([min_eig(X) for X in DD])
    return PopovGram(mids, h, m, M, dd, (left, right))


@dataclass(frozen=True)
class NnResult:
    nn: bool
    min_eig: float
    threshold: float
    eigenvalues: np.ndarray
    witness: tuple[float, float] | None   # (t, min eig of D + D^H) if negative

    def eigs_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "eigenvalue"])
            for k, v in enumerate(self.eigenvalues):
                w.writerow([k, repr(float(v))])


def nonnegative_supply_check(gram: PopovGram, tol: float = 1e-9) -> NnResult:
    """PSD test of the Gram matrix, after screening ``D + D^H >= 0`` nodewise."""
    lam, _ = herm_eig(gram.matrix)
    thr = -tol * (1.0 + float(np.abs(lam).max()))
    witness = None
    bad = np.flatnonzero(gram.dd_min_eig < -tol * (1.0 + np.abs(gram.dd_min_eig)))
    if bad.size:
        k = int(bad[np.argmin(gram.dd_min_eig[bad])])
        witness = (float(gram.grid[k]), float(gram.dd_min_eig[k]))
    nn = witness is None and bool(lam[0] >= thr)
    return NnResult(nn, float(lam[0]), thr, lam, witness)


def transfer_apply(sys: LtvSystem, t0: float, u, grid) -> np.ndarray:
    """Samples of ``int_{t0}^t C(t) Phi(t,s) B(s) u(s) ds + D(t) u(t)`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != t0:
        raise DomainError("grid must start at t0")
    return simulate(sys, t0, np.zeros(sys.n), u, grid).y


@dataclass(frozen=True)
class SupplyIdentity:
    supply_sim: float
    supply_gram: float
    gap: float


def _input_samples(sys: LtvSystem, u, ts) -> np.ndarray:
    U = _as_input(u, sys.m, sys.domain)
    return U.sample(ts)[:, :, 0].ravel()


def popov_supply_identity(sys: LtvSystem, u, t_a: float, t_b: float, N: int,
                          rtol: float = DEFAULT_RTOL, gram: PopovGram | None = None
                          ) -> SupplyIdentity:
    """Supply from the zero state by simulation versus ``h/2 u^H G u``."""
    gram = popov_gram(sys, t_a, t_b, N, rtol) if gram is None else gram
    ub = _input_samples(sys, u, gram.grid)
    s_gram = 0.5 * gram.h * float(np.real(ub.conj() @ gram.matrix @ ub))
    s_sim = supply_ode(sys, t_a, np.zeros(sys.n), u, t_b, rtol)
    return SupplyIdentity(s_sim, s_gram, abs(s_sim - s_gram))


def output_vs_popov(sys: LtvSystem, u, t_a: float, t_b: float, N: int,
                    rtol: float = DEFAULT_RTOL) -> float:
    """Largest nodewise gap between ``y`` (zero initial state) and ``(Lambda u)/2``.

    The two differ in general even though their pairings with ``u`` agree.
    """
    gram = popov_gram(sys, t_a, t_b, N, rtol)
    ub = _input_samples(sys, u, gram.grid)
    half = 0.5 * (gram.matrix @ ub).reshape(N, sys.m)
    grid = np.concatenate([[t_a], gram.grid])
    y = simulate(sys, t_a, np.zeros(sys.n), u, grid).y[1:]
    return float(np.abs(y - half).max())


def as_input(u, m: int, domain=(-np.inf, np.inf)) -> mf.MatrixFunction:
    return _as_input(u, m, domain)
