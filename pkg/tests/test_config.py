import textwrap

import numpy as np
import pytest

from ltvpass import matfun as mf
from ltvpass.apps import RocketParams, rocket_system
from ltvpass.config import (ConfigError, ConfigFile, format_matrix, load_ph, load_system,
                            parse_domain, parse_grid, parse_interval, parse_vector,
                            settings_from_config, split_matrix, storage_from_config,
                            write_ph, write_system)
from ltvpass.ph import random_ph


def write(tmp_path, text, name="sys.cfg"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


MINIMAL = """\
    [system]
    A = [["-1"]]
    B = [[1]]
    C = [[1]]
    D = [[0]]
    domain = (-10, 10)
"""

ROCKET = """\
    [system]
    A = [[0, "1/(2 - t)"], [0, "-1/(2 - t)"]]
    B = [[0, 0], [1, 1]]
    C = [[0, "1/(2 - t)"], [0, "1/(2 - t)"]]
    D = [[0, 0], [0, 0]]
    domain = (0, 1)

    [storage]
    Q = [[0, 0], [0, "1/(2 - t)"]]

    [grid]
    interval = 0:1
    nodes = 11

    [tolerances]
    kyp_tol = 1e-8
"""


def test_minimal_file(tmp_path):
    sys = load_system(write(tmp_path, MINIMAL))
    assert sys.n == sys.m == 1 and sys.domain == (-10, 10)
    assert sys.A(0.0)[0, 0] == -1


def test_rocket_file_matches_builder(tmp_path):
    cfg = ConfigFile.read(write(tmp_path, ROCKET))
    sys = load_system(cfg.path)
    model = rocket_system(RocketParams("2 - t"))
    for t in np.linspace(0, 1, 5):
        for X, Y in zip(sys.coefficients(), model.sys.coefficients()):
            np.testing.assert_allclose(X(t), Y(t), atol=1e-15)
    np.testing.assert_allclose(storage_from_config(cfg, sys.domain)(0.5), model.Q(0.5))
    s = settings_from_config(cfg)
    assert s.grid.size == 11 and s.kyp_tol == 1e-8 and s.rtol == 1e-8


def test_malformed_expression_names_the_cell(tmp_path):
    path = write(tmp_path, MINIMAL.replace('[["-1"]]', '[["-1 +* t"]]'))
    with pytest.raises(ConfigError) as info:
        load_system(path)
    err = info.value
    assert err.line == 2 and err.cell == "A[0][0]"
    assert str(path) in str(err)


@pytest.mark.parametrize("bad, fragment", [
    ("[[1, 2], [3]]", "different lengths"),
    ("[[1]", "expected"),
    ("[[1]] x", "trailing"),
])
def test_malformed_matrix(tmp_path, bad, fragment):
    with pytest.raises(ConfigError, match=fragment):
        load_system(write(tmp_path, MINIMAL.replace("[[1]]", bad, 1)))


def test_missing_pieces(tmp_path):
    with pytest.raises(ConfigError, match="missing \\[system\\]"):
        load_system(write(tmp_path, "[other]\nx = 1\n"))
    with pytest.raises(ConfigError, match="missing \\[system\\] D"):
        load_system(write(tmp_path, MINIMAL.replace('    D = [[0]]\n', "")))
    with pytest.raises(ConfigError, match="cannot read"):
        load_system(tmp_path / "nope.cfg")
    with pytest.raises(ConfigError):
        load_system(write(tmp_path, MINIMAL.replace('[["-1"]]', "[[1, 1]]")))


def test_split_matrix_forms():
    assert split_matrix('[["sin(t), 1", 2], [t^2, \'x\']]') == [["sin(t), 1", "2"], ["t^2", "x"]]
    assert split_matrix("[[piecewise{t<0: 1; else: 0}]]") == [["piecewise{t<0: 1; else: 0}"]]
    assert format_matrix([["1", "t"]]) == '[["1", "t"]]'


def test_small_parsers():
    assert parse_domain("(-10, 10)") == (-10, 10)
    assert parse_interval("0:2") == (0, 2)
    assert parse_grid("0:1:5").tolist() == [0, 0.25, 0.5, 0.75, 1]
    np.testing.assert_allclose(parse_vector("1, 2*i; -3"), [1, 2j, -3])
    for f, s in ((parse_domain, "(1, 1)"), (parse_interval, "2:1"), (parse_grid, "0:1:1")):
        with pytest.raises(ValueError):
            f(s)


def test_system_round_trip(tmp_path, first_order):
    write_system(tmp_path / "out.cfg", first_order, np.linspace(0, 1, 3))
    back = load_system(tmp_path / "out.cfg")
    assert back.domain == first_order.domain
    assert back.A(0.3)[0, 0] == -1


def test_ph_round_trip_with_samples(tmp_path):
    ph = random_ph(np.random.default_rng(1), 2, 1, rank=1)
    grid = np.linspace(0, 1, 201)
    write_ph(tmp_path / "ph.cfg", ph, grid, {"rank": 1})
    back = load_ph(tmp_path / "ph.cfg")
    for t in (0.0, 0.5, 1.0):
        for k in "QKJRGPSN":
            np.testing.assert_allclose(getattr(back, k)(t), getattr(ph, k)(t), atol=1e-10)
    # between nodes the fallback interpolates linearly
    np.testing.assert_allclose(back.Q(0.0025), ph.Q(0.0025), atol=1e-4)
    assert ConfigFile.read(tmp_path / "ph.cfg").get("info", "rank") == "1"


def test_settings_errors(tmp_path):
    cfg = ConfigFile.read(write(tmp_path, textwrap.dedent(MINIMAL) + "\n[tolerances]\nkyp_tol = -1\n"))
    with pytest.raises(ConfigError, match="positive"):
        settings_from_config(cfg)
