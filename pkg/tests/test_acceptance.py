"""Acceptance criteria, one test per criterion with a PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``)
to see the report lines.
"""

import math
import time

import numpy as np
import pytest

from ltvpass import expr as ex
from ltvpass import matfun as mf
from ltvpass.apps import HeatingParams, RocketParams, heating_system, rocket_system
from ltvpass.dissipativity import (available_storage, dissipation_check, kyp_check,
                                   kyp_matrix, rde_integrate)
from ltvpass.ltv import LtvSystem, simulate, state_transition
from ltvpass.ph import assemble_system, canonical_ph, power_balance_residual, random_ph
from ltvpass.popov import (nonnegative_supply_check, output_vs_popov, popov_gram,
                           popov_supply_identity)
from ltvpass.transforms import verify_invariance

RTOL = 1e-8


def report(n, ok, elapsed, limit, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  ({elapsed:.2f}s / {limit}s)  {detail}"
    print(line)
    return line


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# -- shared builders -------------------------------------------------------------------

def rocket():
    return rocket_system(RocketParams("2 - t", (0.0, 1.0)))


HEATING = {
    "constant": HeatingParams("1", "1", 2.0, 1.0, (0.0, 10.0)),
    "sinusoidal": HeatingParams("1", "1 + sin(t)/2", 3.0, 1.5, (0.0, 10.0)),
}


def lti(a, b, c, d, dom=(-30.0, 30.0)):
    return LtvSystem.from_exprs([[a]], [[b]], [[c]], [[d]], dom)


def random_sizes(rng):
    return int(rng.integers(1, 4)), int(rng.integers(1, 4))


def random_phs(seed, count):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n, m = random_sizes(rng)
        rank = int(rng.integers(0, n + 1)) if rng.random() < 0.3 else None
        out.append(random_ph(rng, n, m, rank=rank))
    return out


def random_input(rng, m, dom):
    rows = []
    for _ in range(m):
        a, b, w = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 6)
        rows.append([ex.parse(f"{a:.6f} + {b:.6f}*sin({w:.6f}*t)")])
    return mf.matrix(rows, dom)


def random_transition_system(rng, piecewise=False):
    n = int(rng.integers(1, 4))
    A0 = rng.standard_normal((n, n))
    A1 = rng.standard_normal((n, n))
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            e = f"{A0[i, j]:.6f} + {A1[i, j]:.6f}*sin(2*t)"
            if piecewise and i == j:
                e = f"piecewise{{t<0.5: {e}; else: {A0[i, j]:.6f} - 1}}"
            row.append(e)
        rows.append(row)
    Z = [[0]] * n
    return LtvSystem.from_exprs(rows, Z, [[0] * n], [[0]], (0.0, 2.0))


# -- criteria --------------------------------------------------------------------------

def criterion_1():
    def run():
        model = rocket()
        grid = np.linspace(0, 1, 101)
        can = canonical_ph(model.sys, model.Q, grid)
        err = 0.0
        for t in grid:
            m, dm = 2 - t, -1.0
            K11 = can.ph.K(t)[0, 0]
            R11 = can.ph.R(t)[0, 0]
            err = max(err, abs(K11 - (-dm / (2 * m))), abs(R11 - (-dm / 2)))
        return err, can.ph.K(0.0)[0, 0].real, can.ph.R(0.0)[0, 0].real
    (err, k0, r0), dt = timed(run)
    ok = err <= 1e-10 and dt < 2 and abs(k0 - 0.25) < 1e-12 and abs(r0 - 0.5) < 1e-12
    return ok, report(1, ok, dt, 2, f"max |K11, R11 error| = {err:.2e}; K11(0)={k0:.12g}, R11(0)={r0:.12g}")


def criterion_2():
    def run():
        worst, holds = 0.0, True
        grid = np.linspace(0, 10, 201)
        for p in HEATING.values():
            model = heating_system(p)
            for t in grid:
                qp, qd = p.q_p(t).real, p.q_d(t).real
                Vh = model.V_h(t)[0, 0].real
                if p.q_p.is_constant and p.q_d.is_constant:
                    Vh_ref = p.V_h0 + (qp - qd) * t
                else:
                    Vh_ref = p.V_h0 + (math.cos(t) - 1) / 2   # q_p - q_d = -sin(t)/2
                Vc_ref = p.V_s - Vh_ref
                ref = np.diag([(qp + qd) / Vh_ref ** 2, (qp + qd) / Vc_ref ** 2])
                M = kyp_matrix(model.sys, model.Q, t)
                worst = max(worst, np.abs(M[:2, :2] - ref).max(), np.abs(M[:2, 2:]).max())
            holds &= kyp_check(model.sys, model.Q, grid).holds
        return worst, holds
    (err, holds), dt = timed(run)
    ok = err <= 1e-10 and holds and dt < 2
    return ok, report(2, ok, dt, 2, f"max KYP block error = {err:.2e}; kyp_check holds = {holds}")


def criterion_3():
    target = 3 - 2 * math.sqrt(2)

    def run():
        sys = lti("-1", "1", "1", "1")
        sol = rde_integrate(sys, 20.0, [[0.0]], 0.0)
        q0 = sol.Q(0.0)[0, 0].real
        va = available_storage(sys, 0.0, [1.0], 20.0)
        return q0, va
    (q0, va), dt = timed(run)
    e1, e2 = abs(q0 - target), abs(va - target / 2)
    ok = e1 <= 1e-5 and e2 <= 1e-5 and dt < 1
    return ok, report(3, ok, dt, 1, f"Q(0) error = {e1:.2e}; available storage error = {e2:.2e}")


def criterion_4():
    def run():
        sys = lti("-1", "1", "1", "0")
        u = mf.constant([[1.0]])
        a = popov_supply_identity(sys, u, 0.0, 1.0, 200)
        b = popov_supply_identity(sys, u, 0.0, 1.0, 400)
        return a, b
    (a, b), dt = timed(run)
    ref = math.exp(-1)
    ratio = a.gap / b.gap
    ok = (a.gap <= 1e-3 and abs(a.supply_sim - ref) <= 1e-3 and abs(a.supply_gram - ref) <= 1e-3
          and ratio >= 3.5 and dt < 5)
    return ok, report(4, ok, dt, 5, f"gap(N=200) = {a.gap:.2e}, gap ratio = {ratio:.2f}, "
                             f"sim = {a.supply_sim:.7f}, gram = {a.supply_gram:.7f}")


def criterion_5():
    def run():
        rng = np.random.default_rng(5)
        fails = []
        worst_kyp, worst_diss, worst_nn = math.inf, -math.inf, math.inf
        grid_kyp = np.linspace(0, 1, 51)
        grid_traj = np.linspace(0, 1, 1001)
        for k, ph in enumerate(random_phs(55, 50)):
            sys = assemble_system(ph)
            kr = kyp_check(sys, ph.Q, grid_kyp, 1e-9)
            worst_kyp = min(worst_kyp, kr.worst_node[1])
            if not kr.holds:
                fails.append((k, "kyp"))
            for _ in range(3):
                x0 = rng.standard_normal(sys.n) + 1j * rng.standard_normal(sys.n)
                traj = simulate(sys, 0.0, x0, random_input(rng, sys.m, sys.domain), grid_traj)
                d = dissipation_check(traj, ph.Q, 1e-6)
                worst_diss = max(worst_diss, d.worst_violation)
                if not d.passive_on_trajectory:
                    fails.append((k, "dissipation"))
            gram = popov_gram(sys, 0.0, 1.0, 60)
            nn = nonnegative_supply_check(gram, 1e-6)
            worst_nn = min(worst_nn, nn.min_eig)
            if not nn.nn:
                fails.append((k, "nn"))
        return fails, worst_kyp, worst_diss, worst_nn
    (fails, wk, wd, wn), dt = timed(run)
    ok = not fails and dt < 60
    return ok, report(5, ok, dt, 60, f"failures = {fails}; min KYP eig = {wk:.3e}, "
                             f"max violation = {wd:.2e}, min Popov eig = {wn:.3e}")


def criterion_6():
    def run():
        rng = np.random.default_rng(6)
        worst_cong, worst_supply, bad = 0.0, 0.0, []
        grid = np.linspace(0, 1, 21)
        theta = ex.parse("(exp(t) - 1)/(exp(1) - 1)")
        for k, ph in enumerate(random_phs(66, 10)):
            sys = assemble_system(ph)
            n = sys.n
            Z0, Z1 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
            Z = (mf.constant(2 * np.eye(n) + 0.3 * Z0, sys.domain)
                 + mf.matrix([[f"{0.3 * Z1[i, j]:.6f}*sin(t)" for j in range(n)] for i in range(n)],
                             sys.domain))
            st = verify_invariance(sys, ph.Q, "state", grid, Z=Z, ph=ph)
            tm = verify_invariance(sys, ph.Q, "time", grid, theta=theta, ph=ph,
                                   u=random_input(rng, sys.m, sys.domain))
            c = {s.name: s for s in st.checks}
            ct = {s.name: s for s in tm.checks}
            worst_cong = max(worst_cong, c["congruence identity"].residual,
                             ct["congruence identity"].residual)
            worst_supply = max(worst_supply, ct["supply invariant"].residual)
            if not (st.passed and tm.passed):
                bad.append(k)
        return bad, worst_cong, worst_supply
    (bad, wc, ws), dt = timed(run)
    ok = not bad and wc <= 1e-9 and ws <= 1e-6 and dt < 30
    return ok, report(6, ok, dt, 30, f"failing systems = {bad}; congruence residual = {wc:.2e}, "
                             f"time-map supply gap = {ws:.2e}")


def criterion_7():
    def run():
        rng = np.random.default_rng(7)
        worst = 0.0
        for k in range(20):
            sys = random_transition_system(rng, piecewise=(k == 0))
            ts = np.sort(rng.uniform(0, 2, 3))
            r, s, t = rng.permutation(ts)
            Pts = state_transition(sys, t, s, RTOL)
            Psr = state_transition(sys, s, r, RTOL)
            Ptr = state_transition(sys, t, r, RTOL)
            Pst = state_transition(sys, s, t, RTOL)
            I = np.eye(sys.n)
            cyc = np.linalg.norm(Pts @ Psr - Ptr) / max(1.0, np.linalg.norm(Ptr))
            inv = np.linalg.norm(Pts @ Pst - I)
            worst = max(worst, cyc, inv)
        return worst
    worst, dt = timed(run)
    ok = worst <= 10 * RTOL and dt < 10
    return ok, report(7, ok, dt, 10, f"max identity error = {worst:.2e} (bound {10 * RTOL:.0e})")


def criterion_8():
    def run():
        model = rocket()
        u = mf.matrix([["1 + t"], ["cos(3*t)"]], (0.0, 1.0))
        res = []
        for nodes in (21, 41, 81, 161):
            grid = np.linspace(0, 1, nodes)
            traj = simulate(model.sys, 0.0, [0.0, 1.0], u, grid, rtol=1e-12, atol=1e-14)
            res.append(power_balance_residual(model.ph, traj).max_residual)
        return res
    res, dt = timed(run)
    factors = [a / b for a, b in zip(res[:-1], res[1:])]
    ok = min(factors) >= 3.5 and res[-1] <= 1e-6 and dt < 5
    return ok, report(8, ok, dt, 5, "residuals = " + ", ".join(f"{r:.2e}" for r in res)
                      + "; factors = " + ", ".join(f"{f:.2f}" for f in factors))


def criterion_9():
    def run():
        d = lti("0", "0", "0", "-1", (0.0, 1.0))
        nn = nonnegative_supply_check(popov_gram(d, 0.0, 1.0, 50))
        tx = LtvSystem.from_exprs([[0]], [[1]], [["t"]], [[0]], (1.0, 2.0))
        kr = kyp_check(tx, mf.matrix([["t"]], (1.0, 2.0)), np.linspace(1, 2, 11))
        gap = output_vs_popov(lti("-1", "1", "1", "0"), mf.constant([[1.0]]), 0.0, 1.0, 200)
        return nn, kr, gap
    (nn, kr, gap), dt = timed(run)
    ok = (not nn.nn and nn.witness is not None and nn.witness[1] < 0
          and not kr.holds and gap > 0.1 and dt < 5)
    return ok, report(9, ok, dt, 5, f"D=-1 nn = {nn.nn}, witness = {nn.witness}; "
                             f"y=tx holds = {kr.holds}; y vs Lambda u/2 gap = {gap:.4f}")


def derivative_cases():
    """Every matrix function whose derivative enters criteria 1 to 9."""
    cases = []
    r = rocket()
    cases += [("rocket " + k, v) for k, v in r.ph.coefficients().items()]
    cases += [("rocket A", r.sys.A), ("rocket C", r.sys.C)]
    for name, p in HEATING.items():
        h = heating_system(p)
        cases += [(f"heating {name} Q", h.Q), (f"heating {name} A", h.sys.A),
                  (f"heating {name} V_h", h.V_h), (f"heating {name} C", h.sys.C)]
    for k, ph in enumerate(random_phs(55, 50)):
        cases += [(f"random {k} Q", ph.Q), (f"random {k} W", ph.W), (f"random {k} K", ph.K)]
    cases.append(("time map", mf.matrix([["(exp(t) - 1)/(exp(1) - 1)"]], (0.0, 1.0))))
    rng = np.random.default_rng(7)
    cases.append(("piecewise A", random_transition_system(rng, piecewise=True).A))
    return cases


def criterion_10():
    def run():
        rng = np.random.default_rng(10)
        worst, where = 0.0, None
        h = 1e-5
        for name, F in derivative_cases():
            lo, hi = F.domain
            lo, hi = max(lo, 0.0), min(hi, 10.0 if hi > 1 else hi)
            excl = F.excluded_points(lo, hi)
            dF = F.derivative()
            pts = []
            while len(pts) < 100:
                t = rng.uniform(lo + 2 * h, hi - 2 * h)
                if all(abs(t - p) > 10 * h for p in excl):
                    pts.append(t)
            for t in pts:
                d = dF(t)
                fd = (F(t + h) - F(t - h)) / (2 * h)
                err = np.abs(d - fd).max() / (1 + np.abs(d).max())
                if err > worst:
                    worst, where = err, (name, t)
        return worst, where
    (worst, where), dt = timed(run)
    ok = worst <= 1e-6
    return ok, report(10, ok, dt, "-", f"max derivative error = {worst:.2e} at {where}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 11)])
def test_acceptance(criterion, capsys):
    ok, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [c()[0] for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
