import json
import subprocess
import sys

import pytest

from pmquad.cli import build_parser, run
from pmquad.mathcore import BETA

SUBCOMMANDS = ["constants", "simulate", "pmq", "martingale", "verify-h", "solve-beta", "chords", "fit", "plot"]


def invoke(tmp_path, *argv):
    out = tmp_path / "out"
    return run([*argv, "--out", str(out)]), out


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_exits_zero(sub, capsys):
    assert run([sub, "--help"]) == 0
    text = capsys.readouterr().out
    assert "--seed" in text and "--out" in text and "--config" in text


def test_usage_errors(capsys):
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["constants", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_constants(tmp_path, capsys):
    code, out = invoke(tmp_path, "constants")
    assert code == 0
    text = capsys.readouterr().out
    assert f"beta = {BETA!r}" in text
    assert "K0 = 2.73256999135" in text
    assert (out / "manifest.json").exists()


def test_solve_beta(tmp_path, capsys):
    code, _ = invoke(tmp_path, "solve-beta", "--kernel", "quad", "--tol", "1e-8")
    assert code == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert abs(float(line.split("=")[1]) - BETA) < 1e-6


def test_solve_beta_bad_bracket(tmp_path):
    code, _ = invoke(tmp_path, "solve-beta", "--bracket", "0.7,1.0")
    assert code == 2


def test_verify_h(tmp_path):
    code, out = invoke(tmp_path, "verify-h", "--x-grid", "0.2,0.5")
    assert code == 0
    rows = (out / "residuals.csv").read_text().splitlines()
    assert rows[0] == "kernel,b,c,x,method,residual,stderr"
    assert all(abs(float(r.split(",")[5])) < 1e-8 for r in rows[1:])


def test_simulate_and_plot(tmp_path):
    code, out = invoke(tmp_path, "simulate", "--t-grid", "5,20", "--x-points", "20")
    assert code == 0
    for name in ("leaves.csv", "profile.csv", "profile.svg", "manifest.json"):
        assert (out / name).exists()
    code, _ = invoke(tmp_path, "plot", str(out / "profile.csv"), "--x-col", "x", "--y-col", "scaledN",
                     "--group-col", "t", "--name", "again.svg")
    assert code == 0
    assert (out / "again.svg").read_text().startswith("<?xml")


def test_plot_loglog_nonpositive_is_numerical_failure(tmp_path):
    csv = tmp_path / "d.csv"
    csv.write_text("t,mean\n1,1\n2,0\n3,2\n")
    code, _ = invoke(tmp_path, "plot", str(csv), "--mode", "loglog")
    assert code == 2


def test_fit_exact_power_law(tmp_path, capsys):
    csv = tmp_path / "d.csv"
    csv.write_text("t,mean\n" + "".join(f"{t},{3 * t ** 0.75!r}\n" for t in (10, 100, 1000, 5000)))
    code, _ = invoke(tmp_path, "fit", str(csv))
    assert code == 0
    text = capsys.readouterr().out
    assert abs(float(text.split("exponent = ")[1].split()[0]) - 0.75) < 1e-12


def test_fit_missing_file(tmp_path):
    assert invoke(tmp_path, "fit", str(tmp_path / "none.csv"))[0] == 1


def test_pmq_seed_reproducible_and_config_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"trials": 7, "t_grid": [2, 4, 8], "x_list": [0.5], "master_seed": 5}))
    outputs = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert run(["pmq", "--config", str(cfg), "--trials", "9", "--out", str(out)]) == 0
        outputs.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "timings.json"})
    assert outputs[0] == outputs[1]
    doc = json.loads(outputs[0]["manifest.json"])
    assert doc["config"]["trials"] == 9
    assert doc["master_seed"] == 5


def test_martingale_and_chords(tmp_path):
    code, out = invoke(tmp_path, "martingale", "--t", "30")
    assert code == 0
    assert (out / "trajectory.csv").read_text().startswith("t,M,N,scaledN\n")
    code, out = invoke(tmp_path, "chords", "--attempts", "20", "--grid", "10000")
    assert code == 0
    assert (out / "chords.csv").read_text().startswith("a,b,attempt_index\n")
    assert (out / "fragments.csv").read_text().startswith("component_index,mass,param\n")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pmquad", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert all(s in proc.stdout for s in SUBCOMMANDS)


def test_parser_lists_all_subcommands():
    assert set(SUBCOMMANDS) <= set(build_parser()._subparsers._group_actions[0].choices)
