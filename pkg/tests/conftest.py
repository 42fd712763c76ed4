import numpy as np
import pytest

from ltvpass.ltv import LtvSystem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def first_order():
    """x' = -x + u, y = x."""
    return LtvSystem.from_exprs([["-1"]], [[1]], [[1]], [[0]], (-10, 10))


@pytest.fixture
def integrator():
    """x' = u, y = x."""
    return LtvSystem.from_exprs([[0]], [[1]], [[1]], [[0]], (-10, 10))


def central_diff(f, t, h=1e-6):
    return (f(t + h) - f(t - h)) / (2 * h)
