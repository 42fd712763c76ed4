import io
import math
import shutil
import subprocess
import textwrap

import pytest

from ltvpass.cli import main
from ltvpass.config import load_ph

LTI = """\
[system]
A = [["-1"]]
B = [[1]]
C = [[1]]
D = [[1]]
domain = (-100, 100)

[storage]
Q = [["0.1"]]
"""

DNEG = """\
[system]
A = [[0]]
B = [[0]]
C = [[0]]
D = [[-1]]
domain = (0, 1)
"""


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, parse(out.getvalue()), err.getvalue(), out.getvalue()


def parse(text):
    kv = {}
    for line in text.splitlines():
        if not line:
            break
        k, _, v = line.partition("=")
        kv[k] = v
    return kv


@pytest.fixture
def cfg(tmp_path):
    def make(text, name="sys.cfg"):
        p = tmp_path / name
        p.write_text(textwrap.dedent(text))
        return str(p)
    return make


def test_heating_check_kyp(tmp_path):
    code, kv, _, text = run("check-kyp", "--preset", "heating", "--qp", "1", "--qd", "1",
                            "--vs", "2", "--vh0", "1", "--grid", "0:10:201", "--out", str(tmp_path))
    assert code == 0
    assert kv["command"] == "check-kyp" and kv["status"] == "holds" and kv["holds"] == "true"
    assert float(kv["min_eig"]) == pytest.approx(0.0, abs=1e-12)
    assert "t min_eig" in text
    assert len((tmp_path / "kyp.csv").read_text().splitlines()) == 202


def test_popov_negative_feedthrough(cfg, tmp_path):
    code, kv, _, text = run("popov", "--system", cfg(DNEG), "--interval", "0:1", "--nodes", "100",
                            "--out", str(tmp_path))
    assert code == 1 and kv["status"] == "fails" and kv["nn"] == "false"
    assert float(kv["feedthrough_witness_min_eig"]) == pytest.approx(-2.0)
    assert "D+D^H" in text
    assert (tmp_path / "popov_eigs.csv").exists() and (tmp_path / "popov_gram.txt").exists()


def test_available_storage(cfg):
    code, kv, _, _ = run("available-storage", "--system", cfg(LTI), "--at", "0", "--state", "1",
                         "--horizon", "20")
    assert code == 0
    assert float(kv["available_storage"]) == pytest.approx((3 - 2 * math.sqrt(2)) / 2, abs=1e-5)


def test_parse_error_names_cell(cfg):
    path = cfg(LTI.replace('[["-1"]]', '[["-1 +* t"]]'))
    code, kv, err, _ = run("check-kyp", "--system", path)
    assert code == 2 and kv == {}
    assert "status=input_error" in err and "error=ConfigError" in err
    assert "line 2" in err and "A[0][0]" in err and path in err


def test_canonical_ph_rocket_writes_exact_config(tmp_path):
    code, kv, _, _ = run("canonical-ph", "--preset", "rocket", "--grid", "0:1:101",
                         "--out", str(tmp_path))
    assert code == 0 and kv["rank"] == "1"
    assert float(kv["reassembly_error"]) < 1e-12
    ph = load_ph(tmp_path / "ph.cfg")
    assert ph.K(0.0)[0, 0] == pytest.approx(0.25)
    assert ph.R(0.0)[0, 0] == pytest.approx(0.5)


def test_canonical_ph_rejects_bad_q(cfg):
    code, kv, _, _ = run("canonical-ph", "--system", cfg(LTI), "--Q", '[["-1"]]', "--grid", "0:1:11")
    assert code == 1 and kv["reason"] == "NotAKypSolution"


def test_simulate_and_supply(cfg, tmp_path):
    path = cfg(LTI.replace('D = [[1]]', 'D = [[0]]'))
    code, kv, _, _ = run("supply", "--system", path, "--input", "1", "--grid", "0:1:2001")
    assert code == 0 and float(kv["supply"]) == pytest.approx(math.exp(-1), abs=1e-6)
    code, kv, _, _ = run("simulate", "--system", path, "--x0", "1", "--grid", "0:2:21",
                         "--out", str(tmp_path))
    assert code == 0 and float(kv["final_x"]) == pytest.approx(math.exp(-2), rel=1e-7)
    assert (tmp_path / "trajectory.csv").exists()


def test_power_balance_rocket():
    code, kv, _, _ = run("power-balance", "--preset", "rocket", "--grid", "0:1:161",
                         "--input", "1; cos(3*t)", "--rtol", "1e-12")
    assert code == 0 and float(kv["max_residual"]) < 1e-6


def test_gramian(cfg):
    code, kv, _, text = run("gramian", "--system", cfg(LTI), "--interval", "0:1", "--grid", "0:1:11")
    assert code == 0 and kv["reachable"] == "true"
    assert float(kv["min_eig"]) == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-8)


def test_gramian_unreachable(cfg):
    code, kv, _, _ = run("gramian", "--system", cfg(DNEG), "--interval", "0:1")
    assert code == 1 and kv["reachable"] == "false"


def test_integral_kyp(cfg):
    code, kv, _, _ = run("check-integral-kyp", "--preset", "rocket", "--grid", "0:1:11")
    assert code == 0 and kv["intervals"] == "11"


def test_transform_and_verify(cfg, tmp_path):
    path = cfg(LTI)
    code, kv, _, _ = run("transform", "--system", path, "--kind", "time", "--theta", "2*t",
                         "--new-domain", "0:0.5", "--grid", "0:1:11", "--out", str(tmp_path))
    assert code == 0 and float(kv["min_rate"]) == 2.0
    assert (tmp_path / "system.cfg").exists()
    code, kv, _, _ = run("verify-invariance", "--preset", "rocket", "--kind", "state",
                         "--Z", '[["2", "t"], ["0", "1"]]', "--grid", "0:1:11")
    assert code == 0 and kv["passed"] == "true" and kv["congruence_identity"] == "true"


def test_singular_transform_is_numerical_error(cfg):
    code, _, err, _ = run("transform", "--system", cfg(LTI), "--kind", "state",
                          "--Z", '[["t - 0.5"]]', "--grid", "0:1:11")
    assert code == 3 and "SingularTransform" in err


@pytest.mark.parametrize("argv", [
    ["check-kyp"],
    ["check-kyp", "--preset", "rocket", "--grid", "0:1"],
    ["available-storage", "--preset", "rocket"],
    ["nonsense"],
])
def test_usage_errors(argv):
    code, _, _, _ = run(*argv)
    assert code == 2


def test_console_script_installed(cfg):
    exe = shutil.which("ltvpass")
    if exe is None:
        pytest.skip("console script not on PATH")
    r = subprocess.run([exe, "popov", "--system", cfg(DNEG), "--interval", "0:1", "--nodes", "20"],
                       capture_output=True, text=True)
    assert r.returncode == 1 and "status=fails" in r.stdout
