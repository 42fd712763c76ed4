"""Builders for two worked applications: a variable-mass rocket and a stratified
hot-water storage tank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import expr as ex
from . import matfun as mf
from .errors import DomainError, InvariantViolation, VolumeNonPositive
from .ltv import LtvSystem
from .ph import PhRepresentation, assemble_system


def _check_grid(domain, nodes):
    lo, hi = domain
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise DomainError(f"application builders need a finite domain, got {domain}")
    return np.linspace(lo, hi, nodes)


@dataclass(frozen=True)
class RocketParams:
    """Mass ``m(t)`` (positive, weakly decreasing) on a finite ``domain``.

    State ``x = (z, p)`` (height, momentum); inputs ``u = (v_e, F_ext)``
    (exhaust velocity, external force); outputs ``y = (-m' v, v)`` with ``v = p/m``.
    """

    m: ex.TimeExpr
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "m", ex.as_expr(self.m))


@dataclass(frozen=True)
class RocketModel:
    sys: LtvSystem
    ph: PhRepresentation
    Q: mf.MatrixFunction


def rocket_system(params: RocketParams, nodes: int = 201) -> RocketModel:
    m = params.m
    dm = ex.differentiate(m)
    dom = params.domain
    for t in _check_grid(dom, nodes):
        if not m(t).real > 0:
            raise InvariantViolation("m > 0", float(t), float(m(t).real))
        if dm(t).real > 0:
            raise InvariantViolation("m' <= 0", float(t), float(dm(t).real))
    inv_m = ex.ONE / m
    half = ex.const(0.5)
    Q = mf.matrix([[0, 0], [0, inv_m]], dom)
    K = mf.matrix([[0, 0], [0, -half * dm * inv_m]], dom)
    R = mf.matrix([[0, 0], [0, -half * dm]], dom)
    J = mf.matrix([[0, 1], [-1, 0]], dom)
    G = mf.matrix([[0, 0], [-dm, 1]], dom)
    Z2 = mf.zeros(2, 2, dom)
    ph = PhRepresentation(Q, K, J, R, G, Z2, Z2, Z2, dom)
    A = mf.matrix([[0, inv_m], [0, dm * inv_m]], dom)
    C = mf.matrix([[0, -dm * inv_m], [0, inv_m]], dom)
    sys = LtvSystem(A, G, C, Z2, dom)
    # the displayed coefficients must agree with the pH assembly
    asm = assemble_system(ph)
    for t in _check_grid(dom, 11):
        for X, Y, name in ((sys.A, asm.A, "A"), (sys.C, asm.C, "C")):
            err = np.abs(X(t) - Y(t)).max()
            if err > 1e-12 * (1 + np.abs(X(t)).max()):
                raise InvariantViolation(f"rocket {name} assembly", float(t), float(err))
    return RocketModel(sys, ph, Q)


@dataclass(frozen=True)
class HeatingParams:
    """Mass flows ``q_p``, ``q_d`` (positive), total volume ``V_s`` and initial
    hot volume ``V_h0`` at the left end of ``domain``.

    State ``x = (V_h T_h, V_c T_c)``; inputs ``u = (T_in_p, T_in_d)``.
    The hot volume follows ``V_h' = q_p - q_d``.
    """

    q_p: ex.TimeExpr
    q_d: ex.TimeExpr
    V_s: float
    V_h0: float
    domain: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        object.__setattr__(self, "q_p", ex.as_expr(self.q_p))
        object.__setattr__(self, "q_d", ex.as_expr(self.q_d))


@dataclass(frozen=True)
class HeatingModel:
    sys: LtvSystem
    ph: PhRepresentation
    Q: mf.MatrixFunction
    V_h: mf.MatrixFunction
    kyp_residual_ref: mf.MatrixFunction


def hot_volume(params: HeatingParams) -> mf.MatrixFunction:
    """``V_h(t) = V_h0 + int_{t0}^t (q_p - q_d)`` as a 1x1 matrix function.

    Exact expression when the net flow is constant, otherwise a dense
    high-order solution of the volume ODE; the derivative is always exact.
    """
    dom = params.domain
    t0 = dom[0]
    rate = params.q_p - params.q_d
    if rate.is_constant:
        return mf.matrix([[ex.const(params.V_h0) + rate * (ex.T - ex.const(t0))]], dom)
    f = rate._fn()
    pts = sorted(set(rate.excluded_points(*dom)) - set(dom))
    cuts = [dom[0]] + pts + [dom[1]]
    pieces = []
    v = float(params.V_h0)
    for a, b in zip(cuts[:-1], cuts[1:]):
        sol = solve_ivp(lambda t, y: [f(min(max(t, a), np.nextafter(b, a))).real], (a, b), [v],
                        method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
        pieces.append((a, b, sol.sol))
        v = float(sol.y[0, -1])

    def value(t):
        for a, b, s in pieces:
            if a <= t <= b:
                return np.array([[s(t)[0]]])
        raise DomainError(f"t={t!r} outside {dom}")

    return mf.Callable(value, (1, 1), dom, derivative=mf.matrix([[rate]], dom),
                       points=pts, name="V_h")


def heating_system(params: HeatingParams, nodes: int = 201) -> HeatingModel:
    dom = params.domain
    qp, qd = params.q_p, params.q_d
    Vh = hot_volume(params)
    Vc = mf.constant([[params.V_s]], dom) - Vh
    for t in _check_grid(dom, nodes):
        for name, q in (("q_p", qp), ("q_d", qd)):
            if not q(t).real > 0:
                raise InvariantViolation(f"{name} > 0", float(t), float(q(t).real))
        for which, V in (("hot", Vh), ("cold", Vc)):
            val = V(t)[0, 0].real
            if not val > 0:
                raise VolumeNonPositive(which, float(t), val)
    ih, ic = Vh.inv(), Vc.inv()
    z = mf.zeros(1, 1, dom)
    Qp, Qd = mf.matrix([[qp]], dom), mf.matrix([[qd]], dom)

    def diag(a, b):
        return mf.block([[a, z], [z, b]])

    Q = diag(ih, ic)
    A = diag(-(Qd @ ih), -(Qp @ ic))
    B = mf.matrix([[qp, 0], [0, qd]], dom)
    C = B.H @ Q
    Z2 = mf.zeros(2, 2, dom)
    sys = LtvSystem(A, B, C, Z2, dom)
    s = Qp + Qd
    R = 0.5 * diag(s, s)
    rate = Qp - Qd
    K = -0.5 * diag(rate @ ih, -(rate @ ic))
    ph = PhRepresentation(Q, K, Z2, R, B, Z2, Z2, Z2, dom)
    ref = diag(s @ ih @ ih, s @ ic @ ic)
    return HeatingModel(sys, ph, Q, Vh, ref)
