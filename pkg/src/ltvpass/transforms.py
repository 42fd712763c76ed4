"""Equivalence transformations: state, input/output and time reparametrization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from . import matfun as mf
from .dissipativity import StorageCandidate, as_storage, kyp_check, kyp_matrix
from .errors import DomainMismatch, NotOrientationPreserving, SingularTransform
from .ltv import DEFAULT_RTOL, LtvSystem, simulate, supply_ode

SINGULAR_TOL = 1e-10


def check_invertible(Z: mf.MatrixFunction, grid: Sequence[float],
                     tol: float = SINGULAR_TOL) -> float:
    """Smallest singular value of ``Z`` over ``grid``; raises when below ``tol``."""
    worst = np.inf
    for t in grid:
        s = np.linalg.svd(Z(t), compute_uv=False)
        smin = s[-1] if s.size else np.inf
        if not smin > tol:
            raise SingularTransform(float(t), float(smin))
        worst = min(worst, smin)
    return float(worst)


def state_transform(sys: LtvSystem, Z: mf.MatrixFunction, grid: Sequence[float] | None = None,
                    Zinv: mf.MatrixFunction | None = None) -> LtvSystem:
    """``A~ = Z^-1 (A Z - Z')``, ``B~ = Z^-1 B``, ``C~ = C Z`` (``x = Z x~``)."""
    Z = mf.as_matrix_function(Z, domain=sys.domain)
    if grid is not None:
        check_invertible(Z, grid)
    Zi = Z.inv() if Zinv is None else Zinv
    return LtvSystem(Zi @ (sys.A @ Z - Z.derivative()), Zi @ sys.B, sys.C @ Z, sys.D,
                     sys.domain)


def io_transform(sys: LtvSystem, V: mf.MatrixFunction,
                 grid: Sequence[float] | None = None) -> LtvSystem:
    """``B = B V``, ``C = V^H C``, ``D = V^H D V`` (``u = V u_new``, ``y_new = V^H y``)."""
    V = mf.as_matrix_function(V, domain=sys.domain)
    if grid is not None:
        check_invertible(V, grid)
    return LtvSystem(sys.A, sys.B @ V, V.H @ sys.C, V.H @ sys.D @ V, sys.domain)


def check_time_map(theta: ex.TimeExpr, grid: Sequence[float]) -> None:
    d = ex.differentiate(theta)
    for t in grid:
        rate = d(t).real
        if not rate > 0:
            raise NotOrientationPreserving(float(t), float(rate))


def time_transform(sys: LtvSystem, theta, new_domain, grid: Sequence[float] | None = None
                   ) -> LtvSystem:
    """Each coefficient ``X`` becomes ``theta' * (X o theta)`` on ``new_domain``."""
    theta = ex.as_expr(theta)
    lo, hi = float(new_domain[0]), float(new_domain[1])
    if grid is not None:
        check_time_map(theta, grid)
    ends = [theta(t).real for t in (lo, hi) if np.isfinite(t)]
    if any(not sys.domain[0] <= v <= sys.domain[1] for v in ends):
        raise DomainMismatch(f"theta maps ({lo}, {hi}) outside the system domain {sys.domain}")
    rate = mf.ExprMatrix([[ex.differentiate(theta)]], (lo, hi))
    coeffs = [mf.Scaled(rate, X.compose(theta, (lo, hi))) for X in sys.coefficients()]
    return LtvSystem(*coeffs, domain=(lo, hi))


def storage_state_transform(Q, Z: mf.MatrixFunction) -> StorageCandidate:
    Q = as_storage(Q)
    return StorageCandidate(Z.H @ Q.Q @ Z)


def storage_time_transform(Q, theta, new_domain) -> StorageCandidate:
    Q = as_storage(Q)
    return StorageCandidate(Q.Q.compose(ex.as_expr(theta), tuple(new_domain)))


def ph_state_transform(ph, Z: mf.MatrixFunction, Zinv: mf.MatrixFunction | None = None):
    """Transformation rules for pH coefficients under ``x = Z x~``:
    ``K~ = Z^-1 (Z' + K Z)``, ``J~ = Z^-1 J Z^-H``, ``R~ = Z^-1 R Z^-H``,
    ``Q~ = Z^H Q Z``, ``G~ = Z^-1 G``, ``P~ = Z^-1 P``."""
    from .ph import PhRepresentation

    Zi = Z.inv() if Zinv is None else Zinv
    return PhRepresentation(
        Q=Z.H @ ph.Q @ Z, K=Zi @ (Z.derivative() + ph.K @ Z), J=Zi @ ph.J @ Zi.H,
        R=Zi @ ph.R @ Zi.H, G=Zi @ ph.G, P=Zi @ ph.P, S=ph.S, N=ph.N, domain=ph.domain)


def ph_io_transform(ph, V: mf.MatrixFunction):
    from .ph import PhRepresentation

    return PhRepresentation(Q=ph.Q, K=ph.K, J=ph.J, R=ph.R, G=ph.G @ V, P=ph.P @ V,
                            S=V.H @ ph.S @ V, N=V.H @ ph.N @ V, domain=ph.domain)


def ph_time_transform(ph, theta, new_domain):
    from .ph import PhRepresentation

    theta = ex.as_expr(theta)
    dom = (float(new_domain[0]), float(new_domain[1]))
    rate = mf.ExprMatrix([[ex.differentiate(theta)]], dom)
    c = {k: v.compose(theta, dom) for k, v in ph.coefficients().items()}
    return PhRepresentation(Q=c["Q"], **{k: mf.Scaled(rate, c[k]) for k in "KJRGPSN"}, domain=dom)


# -- invariance verification ---------------------------------------------------------

@dataclass
class SubCheck:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class InvarianceReport:
    kind: str
    checks: list[SubCheck] = field(default_factory=list)
    note: str = "transform validity was sampled on the analysis grid only"

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _default_input(m: int, domain):
    return mf.matrix([[ex.parse("1 + sin(3*t)/2")] for _ in range(m)], domain)


def verify_invariance(sys: LtvSystem, Q, kind: str, grid: Sequence[float], *,
                      Z=None, V=None, theta=None, ph=None, u=None, x0=None,
                      kyp_tol: float = 1e-9, congruence_tol: float = 1e-9,
                      supply_tol: float = 1e-6, rtol: float = DEFAULT_RTOL) -> InvarianceReport:
    """Check that KYP solvability, supply and pH structure survive a transformation.

    ``kind`` is ``"state"`` (needs ``Z``), ``"io"`` (needs ``V``) or ``"time"``
    (needs ``theta``; ``grid`` then lives in the new time variable).
    """
    Qs = as_storage(Q, sys.domain)
    grid = np.asarray(grid, dtype=float)
    rep = InvarianceReport(kind)
    n, m = sys.n, sys.m
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=complex)
    if kind == "state":
        Z = mf.as_matrix_function(Z, domain=sys.domain)
        check_invertible(Z, grid)
        new = state_transform(sys, Z)
        Qn = storage_state_transform(Qs, Z)
        E = lambda t: np.block([[Z(t), np.zeros((n, m))], [np.zeros((m, n)), np.eye(m)]])  # noqa: E731
        orig_t = lambda t: t  # noqa: E731
        scale = lambda t: 1.0  # noqa: E731
        u_new = u_old = _default_input(m, sys.domain) if u is None else u
        x0_new = np.linalg.solve(Z(grid[0]), x0)
        ph_new = None if ph is None else ph_state_transform(ph, Z)
    elif kind == "io":
        V = mf.as_matrix_function(V, domain=sys.domain)
        check_invertible(V, grid)
        new = io_transform(sys, V)
        Qn = Qs
        E = lambda t: np.block([[np.eye(n), np.zeros((n, m))], [np.zeros((m, n)), V(t)]])  # noqa: E731
        orig_t = lambda t: t  # noqa: E731
        scale = lambda t: 1.0  # noqa: E731
        u_old = _default_input(m, sys.domain) if u is None else u
        u_new = V.inv() @ mf.as_matrix_function(u_old, domain=sys.domain)
        x0_new = x0
        ph_new = None if ph is None else ph_io_transform(ph, V)
    elif kind == "time":
        theta = ex.as_expr(theta)
        dom = (float(grid[0]), float(grid[-1]))
        check_time_map(theta, grid)
        new = time_transform(sys, theta, dom)
        Qn = storage_time_transform(Qs, theta, dom)
        E = lambda t: np.eye(n + m)  # noqa: E731
        th = theta._fn()
        dth = ex.differentiate(theta)._fn()
        orig_t = lambda t: th(t).real  # noqa: E731
        scale = lambda t: dth(t).real  # noqa: E731
        u_old = _default_input(m, sys.domain) if u is None else mf.as_matrix_function(u, domain=sys.domain)
        u_new = u_old.compose(theta, dom)
        x0_new = x0
        ph_new = None if ph is None else ph_time_transform(ph, theta, dom)
    else:
        raise ValueError(f"unknown transform kind {kind!r}")

    kr = kyp_check(new, Qn, grid, kyp_tol)
    orig = kyp_check(sys, Qs, [orig_t(t) for t in grid], kyp_tol)
    rep.checks.append(SubCheck("kyp preserved", kr.holds or not orig.holds,
                               float(-kr.worst_node[1]),
                               f"original holds={orig.holds}, transformed holds={kr.holds}"))
    worst = 0.0
    for t in kr.grid:
        Et = E(orig_t(t)) if kind != "time" else E(t)
        lhs = scale(t) * Et.conj().T @ kyp_matrix(sys, Qs, orig_t(t), check_excluded=False) @ Et
        rhs = kyp_matrix(new, Qn, t, check_excluded=False)
        worst = max(worst, np.linalg.norm(lhs - rhs) / (1 + np.linalg.norm(lhs)))
    rep.checks.append(SubCheck("congruence identity", worst <= congruence_tol, worst))

    t0n, t1n = grid[0], grid[-1]
    s_old = supply_ode(sys, orig_t(t0n), x0, u_old, orig_t(t1n), rtol=rtol)
    s_new = supply_ode(new, t0n, x0_new, u_new, t1n, rtol=rtol)
    gap = abs(s_old - s_new)
    rep.checks.append(SubCheck("supply invariant", gap <= supply_tol * (1 + abs(s_old)), gap,
                               f"original={s_old:.9g}, transformed={s_new:.9g}"))

    if ph_new is not None:
        res = ph_new.invariant_residuals(grid)
        r = max(v for _, v in res.values())
        rep.checks.append(SubCheck("pH invariants", r <= 1e-9, r))
    return rep
