import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvpass import expr as ex
from ltvpass import matfun as mf
from ltvpass.errors import DimensionMismatch, DomainError

from conftest import central_diff

A = mf.matrix([["sin(t)", "t^2"], ["1", "exp(-t)"]])
B = mf.matrix([["cos(2*t)", "1 + t"], ["t", "2"]])
SPD = mf.matrix([["2 + sin(t)", "t/4"], ["t/4", "3"]])


def _check_derivative(F, ts=(-0.8, 0.1, 0.9)):
    dF = F.derivative()
    for t in ts:
        fd = central_diff(F, t, 1e-5)
        np.testing.assert_allclose(dF(t), fd, atol=1e-7 * (1 + np.abs(fd).max()))


@pytest.mark.parametrize("F", [
    A + B, A - B, A @ B, 3.0 * A, A.H, A.inv(), SPD.inv() @ A,
    A[0:1, :], mf.block([[A, B], [B, A]]),
    mf.CholeskyFactor(SPD), mf.CholeskyFactor(SPD).inv(),
    mf.Scaled(mf.matrix([["cos(t)"]]), A),
    A.compose(ex.parse("t^3 + t"), (-1, 1)),
], ids=["sum", "diff", "prod", "scale", "conjT", "inv", "solve", "slice", "block",
        "chol", "chol_inv", "scaled", "composed"])
def test_algebra_derivatives(F):
    _check_derivative(F)


def test_values():
    t = 0.4
    np.testing.assert_allclose((A @ B)(t), A(t) @ B(t))
    np.testing.assert_allclose(A.H(t), A(t).conj().T)
    np.testing.assert_allclose(A.inv()(t), np.linalg.inv(A(t)))
    F = mf.CholeskyFactor(SPD)(t)
    np.testing.assert_allclose(F.conj().T @ F, SPD(t), atol=1e-14)


def test_cache_is_read_only():
    v = A(0.3)
    with pytest.raises(ValueError):
        v[0, 0] = 1.0
    assert A(0.3) is v


def test_shape_errors():
    with pytest.raises(DimensionMismatch):
        A + mf.eye(3)
    with pytest.raises(DimensionMismatch):
        A @ mf.zeros(3, 1)


def test_domain_intersection():
    F = mf.with_domain(A, (0, 1)) + mf.with_domain(B, (0.5, 2))
    assert F.domain == (0.5, 1)
    with pytest.raises(DomainError):
        mf.with_domain(A, (0, 1)) + mf.with_domain(B, (2, 3))


def test_excluded_points_propagate():
    F = mf.matrix([["abs(t - 0.5)"]]) @ mf.matrix([["piecewise{t<0: 1; else: 2}"]])
    assert F.excluded_points(-1, 1) == pytest.approx([0.0, 0.5])


def test_to_strings_symbolic():
    F = mf.matrix([["t"]]) @ mf.matrix([["2"]]) + mf.eye(1)
    assert ex.parse(F.to_strings()[0][0])(3.0) == pytest.approx(7.0)
    assert mf.CholeskyFactor(SPD).to_strings() is None


@given(st.floats(0.2, 3.0))
@settings(max_examples=30, deadline=None)
def test_invert_monotone(target):
    theta = ex.parse("t^3 + t")
    s = mf.invert_monotone(theta, target, 0.0, 2.0)
    assert theta(s).real == pytest.approx(target, abs=1e-12)


@pytest.mark.parametrize("F", [
    A + B, A @ B, -A, 3.0 * A, A.H, A.inv(), A[1:, :], mf.block([[A, B], [B, A]]),
    mf.Scaled(mf.matrix([["cos(t)"]]), A), A.compose(ex.parse("t^3 + t"), (-1, 1)),
    mf.CholeskyFactor(SPD), mf.eye(2) + A,
], ids=["sum", "prod", "neg", "scale", "conjT", "inv", "slice", "block", "scaled",
        "compose", "chol", "const-sum"])
def test_sample_matches_pointwise(F):
    ts = np.linspace(-0.85, 0.95, 7)
    ref = np.array([F(t) for t in ts])
    np.testing.assert_allclose(F.sample(ts), ref, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(F.sample(ts), ref, rtol=1e-13, atol=1e-13)


def test_sample_inverse_singular_raises():
    from ltvpass.errors import SingularMatrix

    F = mf.matrix([["t", "0"], ["0", "1"]]).inv()
    with pytest.raises(SingularMatrix):
        F.sample([-1.0, 0.0, 1.0])
