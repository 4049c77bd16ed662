import csv
import io
import subprocess
import sys

import pytest

from coherent_learning import cli

FAST = {
    "risk-curve": [],
    "squeezing": [],
    "finite-n": ["--n", "200", "--steps", "2"],
    "eand-finite-n": ["--n", "200", "--steps", "2", "--quad-order", "16", "--r", "opt"],
    "montecarlo": ["--trials", "2000", "--quad-order", "16"],
    "twopoint": ["--steps", "2", "--n", "2000"],
}


def run(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out), "--workers", "1"])
    return code, out


def table(path):
    rows = list(csv.reader(io.StringIO(path.read_text())))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


def test_risk_curve_shape(tmp_path):
    code, out = run(tmp_path, "risk-curve")
    assert code == 0
    head, rows = table(out)
    assert head == ["alpha0", "r_opt_risk", "r_eand_risk", "ratio"]
    assert len(rows) == 28
    assert all(r[2] >= r[1] for r in rows)
    assert max(r[3] for r in rows if r[0] <= 1.5) > 2


def test_squeezing_table(tmp_path):
    code, out = run(tmp_path, "squeezing")
    assert code == 0
    _, rows = table(out)
    assert len(rows) == 60
    assert all(r[1] < 0 for r in rows)
    at_one = [r[1] for r in rows if abs(r[0] - 1.0) < 1e-12]
    assert abs(at_one[0] + 0.0967) < 1e-3


def test_finite_n_residual_shrinks(tmp_path):
    code, out = run(tmp_path, "finite-n", "--n", "200", "--steps", "3")
    assert code == 0
    _, rows = table(out)
    assert [r[0] for r in rows] == [200, 800, 3200]
    res = [abs(r[3]) for r in rows]
    assert res[0] > res[1] > res[2]


def test_eand_finite_n(tmp_path):
    code, out = run(tmp_path, *(["eand-finite-n"] + FAST["eand-finite-n"]))
    assert code == 0
    _, rows = table(out)
    assert len(rows) == 2
    assert all(abs(r[1] - r[2]) < 1e-5 for r in rows)


def test_montecarlo_row(tmp_path):
    code, out = run(tmp_path, "montecarlo", *FAST["montecarlo"])
    assert code == 0
    head, rows = table(out)
    assert rows[0][head.index("trials")] == 2000
    assert abs(rows[0][head.index("z_score")]) < 4


def test_twopoint_table(tmp_path):
    code, out = run(tmp_path, "twopoint", *FAST["twopoint"])
    assert code == 0
    head, rows = table(out)
    for r in rows:
        assert r[head.index("collective_risk")] < r[head.index("local_risk_cstar")]
        assert abs(r[head.index("p_plus")] - r[head.index("p_minus")]) < 1e-10


@pytest.mark.parametrize("command", sorted(FAST))
def test_byte_identical_reruns(tmp_path, command):
    args = [command, *FAST[command], "--seed", "7"]
    _, a = run(tmp_path, *args, name="a.csv")
    _, b = run(tmp_path, *args, name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# grid\nalpha0-min = 0.5\nalpha0_max = 1.0\nsteps = 3\n")
    _, out = run(tmp_path, "squeezing", "--config", str(cfg))
    assert [r[0] for r in table(out)[1]] == [0.5, 0.75, 1.0]
    _, out = run(tmp_path, "squeezing", "--config", str(cfg), "--steps", "2")
    assert len(table(out)[1]) == 2


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(tmp_path, "squeezing", "--config", str(cfg))[0] == 2
    cfg.write_text("just words\n")
    assert run(tmp_path, "squeezing", "--config", str(cfg))[0] == 2
    assert run(tmp_path, "squeezing", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_bad_inputs_exit_two(tmp_path):
    assert run(tmp_path, "risk-curve", "--alpha0-min", "0")[0] == 2
    assert run(tmp_path, "squeezing", "--steps", "0")[0] == 2
    assert run(tmp_path, "finite-n", "--mu", "-1")[0] == 2
    assert cli.main(["squeezing", "--out", str(tmp_path / "no" / "dir.csv")]) == 2
    assert cli.main(["nonsense"]) == 2


def test_env_seed(tmp_path, monkeypatch):
    args = ["montecarlo", *FAST["montecarlo"]]
    monkeypatch.setenv(cli.SEED_ENV, "11")
    _, a = run(tmp_path, *args, name="a.csv")
    _, b = run(tmp_path, *args, "--seed", "11", name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv(cli.SEED_ENV, "eleven")
    assert run(tmp_path, *args, name="c.csv")[0] == 2


def test_stdout_and_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "coherent_learning", "squeezing",
                           "--steps", "2", "--workers", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "alpha0,r_star"


def test_selftest_exit_code(capsys):
    assert cli.main(["selftest"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
