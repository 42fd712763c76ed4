"""Dense complex Hermitian kernels: eigendecomposition, PSD tests, Cholesky, solves.

LAPACK (through numpy/scipy) does the heavy lifting; this module pins down the
conventions the rest of the package relies on:

* eigenvalues ascending, eigenvectors unitary;
* PSD tolerance relative to ``1 + ||M||_2``;
* Cholesky in the form ``M = F^H F`` with ``F`` upper triangular and a real
  positive diagonal (``F[0, 0] = sqrt(M[0, 0])``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, NotPositiveDefinite, SingularMatrix

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12


def herm(M, *, name: str = "matrix", tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return the Hermitian part of ``M`` after checking it is (nearly) Hermitian.

    Deviations up to ``tol * (1 + ||M||_2)`` are silently symmetrized; larger
    ones are logged at warning level (and still symmetrized).
    """
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    dev = np.linalg.norm(M - M.conj().T, 2) if M.size else 0.0
    scale = 1.0 + (np.linalg.norm(M, 2) if M.size else 0.0)
    if dev > tol * scale:
        log.warning("%s deviates from Hermitian by %.3e; symmetrizing", name, dev)
    return 0.5 * (M + M.conj().T)


def herm_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix."""
    H = herm(M)
    if H.size == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ConvergenceFailure("matrix has non-finite entries")
    try:
        lam, V = scipy.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc
    return lam, V


def min_eig(M) -> float:
    H = herm(M)
    if H.size == 0:
        return 0.0
    return float(scipy.linalg.eigvalsh(H, subset_by_index=[0, 0])[0])


@dataclass(frozen=True)
class PsdResult:
    psd: bool
    min_eig: float
    threshold: float

    def __bool__(self):
        return self.psd


def psd_check(M, tol: float) -> PsdResult:
    """``psd`` iff the smallest eigenvalue is at least ``-tol * (1 + ||M||_2)``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    H = herm(M)
    if H.size == 0:
        return PsdResult(True, 0.0, 0.0)
    lam = scipy.linalg.eigvalsh(H)
    threshold = -tol * (1.0 + float(np.max(np.abs(lam))))
    return PsdResult(bool(lam[0] >= threshold), float(lam[0]), threshold)


def cholesky(M, tol: float = 0.0) -> np.ndarray:
    """Factor a positive definite ``M`` as ``F^H F`` with ``F`` upper triangular.

    The diagonal of ``F`` is real and positive.  Built by the pivot recursion
    ``F[0,0] = sqrt(a)``, ``F[0,1:] = b / sqrt(a)`` and recursing on the Schur
    complement ``M[1:,1:] - b^H b / a``; raises :class:`NotPositiveDefinite`
    with the index of the first pivot that is not above ``tol``.
    """
    H = herm(M)
    n = H.shape[0]
    F = np.zeros_like(H)
    S = H.copy()
    for k in range(n):
        a = S[k, k].real
        if not a > tol:
            raise NotPositiveDefinite(k, a)
        r = np.sqrt(a)
        F[k, k] = r
        F[k, k + 1:] = S[k, k + 1:] / r
        S[k + 1:, k + 1:] -= np.outer(F[k, k + 1:].conj(), F[k, k + 1:])
    return F


def cholesky_derivative(F: np.ndarray, dM: np.ndarray) -> np.ndarray:
    """Derivative of the factor ``F`` of ``M = F^H F`` given ``dM``.

    With ``X = dF F^{-1}`` (upper triangular, real diagonal) one has
    ``F^{-H} dM F^{-1} = X + X^H``.
    """
    Finv = scipy.linalg.solve_triangular(F, np.eye(F.shape[0]), lower=False)
    S = Finv.conj().T @ dM @ Finv
    X = np.triu(S, 1) + np.diag(0.5 * np.real(np.diag(S)))
    return X @ F


def solve(M, rhs, *, rcond: float = 1e-14) -> np.ndarray:
    """Solve ``M X = rhs`` for square ``M``; :class:`SingularMatrix` when singular."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    rhs = np.asarray(rhs, dtype=complex)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")
    n = M.shape[0]
    if n == 1:
        if M[0, 0] == 0:
            raise SingularMatrix(0, 1)
        return rhs / M[0, 0]
    s = np.linalg.svd(M, compute_uv=False)
    if n and (s[-1] <= rcond * s[0] or s[0] == 0):
        rank = int(np.sum(s > rcond * max(s[0], np.finfo(float).tiny)))
        raise SingularMatrix(rank, n)
    return np.linalg.solve(M, rhs)


def inv(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return solve(M, np.eye(M.shape[0], dtype=complex))


def inv_many(Ms, *, rcond: float = 1e-14) -> np.ndarray:
    """Inverse of each matrix in a ``(k, n, n)`` stack; same singularity test as :func:`solve`."""
    Ms = np.asarray(Ms, dtype=complex)
    n = Ms.shape[-1]
    if n == 1:
        if np.any(Ms[:, 0, 0] == 0):
            raise SingularMatrix(0, 1)
        return 1.0 / Ms
    for M in Ms[_singular_mask(Ms, rcond)][:1]:
        inv(M)
    return np.linalg.inv(Ms)


def _singular_mask(Ms, rcond):
    if Ms.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    s = np.linalg.svd(Ms, compute_uv=False)
    return (s[:, -1] <= rcond * s[:, 0]) | (s[:, 0] == 0)
