import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltvpass import matfun as mf
from ltvpass.errors import DomainError
from ltvpass.ltv import LtvSystem
from ltvpass.ph import assemble_system, random_ph
from ltvpass.popov import (nonnegative_supply_check, output_vs_popov, popov_gram,
                           popov_supply_identity, transfer_apply)

ONE = mf.constant([[1.0]])


def scalar(a, b, c, d):
    return LtvSystem.from_exprs([[a]], [[b]], [[c]], [[d]], (-5, 5))


@pytest.mark.parametrize("d, expected", [("1", 2.0), ("-1", -2.0)])
def test_pure_feedthrough(d, expected):
    g = popov_gram(scalar("0", "0", "0", d), 0.0, 1.0, 10)
    np.testing.assert_allclose(g.matrix, expected * np.eye(10))


def test_first_order_kernel(first_order):
    N = 50
    g = popov_gram(first_order, 0.0, 1.0, N)
    h = 1.0 / N
    ti = g.grid
    for i, j in [(1, 0), (30, 4), (49, 48)]:
        assert g.matrix[i, j] == pytest.approx(h * math.exp(-(ti[i] - ti[j])), rel=1e-7)
        assert g.matrix[j, i] == pytest.approx(np.conj(g.matrix[i, j]))
    assert g.matrix[3, 3].real == pytest.approx(h)


def test_nonnegative_first_order(first_order, tmp_path):
    res = nonnegative_supply_check(popov_gram(first_order, 0.0, 1.0, 50))
    assert res.nn and res.min_eig >= 0 and res.witness is None
    res.eigs_to_csv(tmp_path / "eigs.csv")
    assert len((tmp_path / "eigs.csv").read_text().splitlines()) == 51


def test_negative_feedthrough_witness():
    res = nonnegative_supply_check(popov_gram(scalar("0", "0", "0", "-1"), 0.0, 1.0, 20))
    assert not res.nn
    assert res.witness[1] == pytest.approx(-2.0)
    assert 0 < res.witness[0] < 1


def test_random_ph_systems_are_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(4):
        sys = assemble_system(random_ph(rng, 2, 2))
        assert nonnegative_supply_check(popov_gram(sys, 0.0, 1.0, 30), 1e-6).nn


@given(st.integers(0, 18), st.integers(2, 20))
@settings(max_examples=30, deadline=None)
def test_subinterval_gram_is_principal_submatrix(start, length):
    sys = scalar("-1", "1", "1", "0.1")
    N = 20
    stop = min(start + length, N)
    if stop - start < 2:
        start = stop - 2
    full = popov_gram(sys, 0.0, 1.0, N)
    sub = popov_gram(sys, start / N, stop / N, stop - start)
    np.testing.assert_allclose(sub.matrix, full.matrix[start:stop, start:stop], atol=1e-8)


@pytest.mark.parametrize("u, expected", [(None, lambda t: 0 * t), (ONE, lambda t: 1 - np.exp(-t))])
def test_transfer_first_order(first_order, u, expected):
    grid = np.linspace(0, 1, 11)
    np.testing.assert_allclose(transfer_apply(first_order, 0.0, u, grid)[:, 0], expected(grid),
                               atol=1e-8)


def test_transfer_feedthrough():
    grid = np.linspace(0, 1, 5)
    out = transfer_apply(scalar("0", "0", "0", "1"), 0.0, [["t"]], grid)
    np.testing.assert_allclose(out[:, 0], grid)
    with pytest.raises(DomainError):
        transfer_apply(scalar("0", "0", "0", "1"), 0.0, ONE, grid[1:])


@pytest.mark.parametrize("sys, u, expected", [
    (scalar("-1", "1", "1", "0"), None, 0.0),
    (scalar("0", "0", "0", "1"), ONE, 1.0),
    (scalar("-1", "1", "1", "0"), ONE, math.exp(-1)),
])
def test_supply_identity(sys, u, expected):
    res = popov_supply_identity(sys, u, 0.0, 1.0, 200)
    assert res.supply_sim == pytest.approx(expected, abs=1e-8)
    assert res.supply_gram == pytest.approx(expected, abs=1e-3)
    assert res.gap <= 1e-3


def test_output_differs_from_half_popov(first_order):
    assert output_vs_popov(first_order, ONE, 0.0, 1.0, 100) > 0.1


def test_gram_dump(tmp_path, first_order):
    g = popov_gram(first_order, 0.0, 1.0, 4)
    g.dump(tmp_path / "g.txt")
    rows = [list(map(float, line.split())) for line in (tmp_path / "g.txt").read_text().splitlines()]
    assert len(rows) == 4 and len(rows[0]) == 8
    assert rows[1][0] == g.matrix[1, 0].real


def test_argument_errors(first_order):
    with pytest.raises(DomainError):
        popov_gram(first_order, 0.0, 1.0, 1)
    with pytest.raises(DomainError):
        popov_gram(first_order, 1.0, 0.0, 10)
