import cmath

import numpy as np
import pytest

from ltvpass import expr as ex
from ltvpass import matfun as mf
from ltvpass.apps import HeatingParams, RocketParams, heating_system, rocket_system
from ltvpass.errors import DomainMismatch, NotOrientationPreserving, SingularTransform
from ltvpass.ltv import LtvSystem, supply_ode
from ltvpass.ph import assemble_system
from ltvpass.transforms import (io_transform, ph_io_transform, ph_state_transform,
                                ph_time_transform, state_transform, time_transform,
                                verify_invariance)

GRID = np.linspace(0, 1, 11)


def coeffs_at(sys, t):
    return [M(t) for M in sys.coefficients()]


def assert_same(s1, s2, grid=GRID, atol=1e-12):
    for t in grid:
        for X, Y in zip(coeffs_at(s1, t), coeffs_at(s2, t)):
            np.testing.assert_allclose(X, Y, atol=atol)


def test_identity_transforms(first_order):
    assert_same(state_transform(first_order, mf.eye(1)), first_order)
    assert_same(io_transform(first_order, mf.eye(1)), first_order)
    assert_same(time_transform(first_order, "t", (0, 1)), first_order)


def test_state_transform_exponential():
    sys = LtvSystem.from_exprs([[0]], [[1]], [[1]], [[0]], (0, 1))
    new = state_transform(sys, mf.matrix([["exp(t)"]], (0, 1)), GRID)
    np.testing.assert_allclose([new.A(t)[0, 0] for t in GRID], -1.0)


def test_state_transform_singular(first_order):
    with pytest.raises(SingularTransform):
        state_transform(first_order, mf.matrix([["t - 0.5"]]), GRID)


def test_io_transform_scaling():
    sys = LtvSystem.from_exprs([[0]], [[0]], [[0]], [[1]], (0, 1))
    new = io_transform(sys, mf.constant([[2.0]]))
    assert new.D(0.3)[0, 0] == 4
    u = mf.matrix([["1 + t"]], (0, 1))
    s_old = supply_ode(sys, 0.0, [0.0], u, 1.0)
    s_new = supply_ode(new, 0.0, [0.0], 0.5 * u, 1.0)
    assert s_new == pytest.approx(s_old, rel=1e-12)


@pytest.mark.parametrize("phi", [0.3, 1.7, -2.4])
def test_io_rotation_keeps_spectrum(phi):
    d = 0.4 + 2j
    sys = LtvSystem.from_exprs([[0]], [[0]], [[0]], [[d]], (0, 1))
    new = io_transform(sys, mf.constant([[cmath.exp(1j * phi)]]))
    D = new.D(0.5)
    assert (D + D.conj().T)[0, 0].real == pytest.approx(2 * d.real)


def test_time_transform_doubling(first_order):
    sys = LtvSystem.from_exprs([["-1 - t"]], [["cos(t)"]], [[1]], [[0]], (0, 2))
    new = time_transform(sys, "2*t", (0, 1))
    for s in GRID:
        assert new.A(s)[0, 0] == pytest.approx(2 * sys.A(2 * s)[0, 0])
        assert new.B(s)[0, 0] == pytest.approx(2 * sys.B(2 * s)[0, 0])


def test_time_transform_supply(first_order):
    new = time_transform(first_order, "2*t", (0, 0.5))
    s_old = supply_ode(first_order, 0.0, [0.0], [[1]], 1.0, rtol=1e-10)
    s_new = supply_ode(new, 0.0, [0.0], [[1]], 0.5, rtol=1e-10)
    assert s_new == pytest.approx(s_old, abs=1e-8)


def test_time_transform_errors(first_order):
    with pytest.raises(NotOrientationPreserving):
        time_transform(first_order, "-t", (0, 1), GRID)
    with pytest.raises(DomainMismatch):
        time_transform(first_order, "20*t", (0, 1))


def test_verify_identity_transforms(first_order):
    for kw in ({"Z": mf.eye(1)}, {"V": mf.eye(1)}, {"theta": "t"}):
        kind = {"Z": "state", "V": "io", "theta": "time"}[next(iter(kw))]
        rep = verify_invariance(first_order, [[1]], kind, GRID, **kw)
        assert rep.passed, rep.checks
        assert {c.name for c in rep.checks} == {"kyp preserved", "congruence identity",
                                                "supply invariant"}


def test_rocket_random_state_transform(rng):
    model = rocket_system(RocketParams("2 - t"))
    Z0, Z1 = rng.standard_normal((2, 2)), rng.standard_normal((2, 2))
    Z = mf.constant(2 * np.eye(2) + 0.3 * Z0, (0, 1)) + mf.constant(0.3 * Z1, (0, 1)) * ex.parse("t^2")
    rep = verify_invariance(model.sys, model.Q, "state", GRID, Z=Z, ph=model.ph)
    assert rep.passed, rep.checks
    new = ph_state_transform(model.ph, Z)
    assert_same(assemble_system(new), state_transform(model.sys, Z), atol=1e-10)


def test_heating_time_map_supply():
    model = heating_system(HeatingParams("1", "1 + sin(t)/2", 3.0, 1.5))
    theta = "t + sin(t)/2"
    rep = verify_invariance(model.sys, model.Q, "time", np.linspace(0, 6, 31), theta=theta,
                            ph=model.ph)
    checks = {c.name: c for c in rep.checks}
    assert rep.passed, rep.checks
    assert checks["supply invariant"].residual <= 1e-6
    new = ph_time_transform(model.ph, theta, (0, 6))
    assert_same(assemble_system(new), time_transform(model.sys, theta, (0, 6)),
                np.linspace(0, 6, 7), atol=1e-10)


def test_io_transform_of_ph(first_order):
    from ltvpass.ph import canonical_ph
    can = canonical_ph(first_order, [[1]], GRID)
    V = mf.matrix([["2 + t"]], first_order.domain)
    new = ph_io_transform(can.ph, V)
    assert_same(assemble_system(new), io_transform(first_order, V))
    assert verify_invariance(first_order, [[1]], "io", GRID, V=V, ph=can.ph).passed


def test_verify_reports_failure_when_supply_breaks(first_order):
    # a non-invertible-in-time map is rejected outright
    with pytest.raises(NotOrientationPreserving):
        verify_invariance(first_order, [[1]], "time", GRID, theta="1 - t")
    with pytest.raises(ValueError):
        verify_invariance(first_order, [[1]], "bogus", GRID)
