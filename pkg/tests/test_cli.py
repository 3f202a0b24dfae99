import json
import math
import os
import subprocess
import sys

import pytest

from incavg import cli

FAST = {"directions": 16, "n_samples": 2, "quad_nodes": 64, "torus_nodes": 64, "table_points": 17,
        "control_points": 21}


def _scenario(tmp_path, **kw):
    data = {"system": "scalar_cos", "eps": [0.5, 0.25], "grids": dict(FAST), "out": str(tmp_path / "out")}
    data.update(kw)
    p = tmp_path / "sc.json"
    p.write_text(json.dumps(data))
    return str(p)


def test_dry_run_prints_plan(capsys):
    assert cli.main(["converge", "--system", "example_5_5", "--dry-run", "--seed", "7"]) == cli.EXIT_OK
    plan = json.loads(capsys.readouterr().out)
    assert plan["command"] == "converge" and plan["system"] == "example_5_5" and plan["dim"] == 1
    assert plan["reproducibility"]["seed"] == 7
    assert {"backend", "version", "grids", "eps"} <= set(plan["reproducibility"])


def test_bound_default_formula_in_dry_run(capsys):
    assert cli.main(["bound", "--system", "example_5_5", "--dry-run"]) == 0
    assert json.loads(capsys.readouterr().out)["formula"] == "control_bound"


@pytest.mark.parametrize("argv", [
    ["average", "--system", "nope"],
    ["average"],
    ["bound", "--system", "scalar_cos", "--formula", "bogus"],
    ["converge", "--system", "scalar_cos", "--eps", "0.1,0.2"],
    ["converge", "--system", "scalar_cos", "--eps", "a,b"],
    ["average", "--scenario", "/nonexistent/scenario.json"],
    ["bound", "--system", "scalar_cos", "--formula", "control_bound", "--out", "{tmp}"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_scenario_and_system_are_exclusive(tmp_path):
    assert cli.main(["average", "--scenario", _scenario(tmp_path), "--system", "scalar_cos"]) == 2


def test_numeric_error_exit_3(tmp_path, capsys):
    sc = _scenario(tmp_path, x0=[5.0])
    assert cli.main(["simulate", "--scenario", sc]) == cli.EXIT_NUMERIC
    assert "numeric error" in capsys.readouterr().err


def test_soundness_violation_exit_4(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "theoretical_bound", lambda cs, eps: (0.0, "forced", {}))
    sc = _scenario(tmp_path)
    assert cli.main(["converge", "--scenario", sc]) == cli.EXIT_SOUNDNESS
    dump = json.loads((tmp_path / "out" / "scalar_cos_soundness_violation.json").read_text())
    assert len(dump["violations"]) == 2
    assert dump["reproducibility"]["scenario"] == "scalar_cos"


def test_bound_key_lemma(tmp_path, capsys):
    out = tmp_path / "b"
    rc = cli.main(["bound", "--system", "scalar_cos", "--formula", "key_lemma", "--T", "0.5",
                   "--eps", "0.1", "--out", str(out)])
    assert rc == 0
    assert "0.05" in capsys.readouterr().out
    doc = json.loads((out / "scalar_cos_bound_key_lemma.json").read_text())
    rep = doc["reports"][0]
    assert rep["value"] == pytest.approx(0.05)
    assert rep["inputs"] == {"M": 1.0, "K": 0.0, "T": 0.5, "eps": 0.1}
    assert doc["sampled_constants"]["K_raw"] == pytest.approx(0.0, abs=1e-12)
    assert "backend" in doc["reproducibility"]


def test_bound_control_example_5_5(tmp_path):
    out = tmp_path / "b"
    assert cli.main(["bound", "--system", "example_5_5", "--eps", "0.1", "--out", str(out)]) == 0
    doc = json.loads((out / "example_5_5_bound_control_bound.json").read_text())
    v = doc["reports"][0]["variants"]
    assert v["formula-derived"] == pytest.approx(18.01338, abs=1e-4)
    assert v["paper-printed"] == pytest.approx(5.73384, abs=1e-4)
    assert [c["M_raw"] for c in doc["sampled_constants"]] == pytest.approx([3.0, 1.0], abs=0.1)


def test_average_scalar_cos(tmp_path, capsys):
    sc = _scenario(tmp_path)
    assert cli.main(["average", "--scenario", sc]) == 0
    out = tmp_path / "out"
    doc = json.loads((out / "scalar_cos_average.json").read_text())
    assert doc["radius_at_x0"] == pytest.approx(0.0, abs=1e-12)
    assert doc["center_at_x0"] == pytest.approx(0.0, abs=1e-12)
    rows = (out / "scalar_cos_average.csv").read_text().splitlines()
    assert rows[0] == "x_1,direction_index,h"
    assert len(rows) == 1 + 21 * 2


def test_converge_outputs_and_determinism(tmp_path):
    sc = _scenario(tmp_path)
    assert cli.main(["converge", "--scenario", sc]) == 0
    out = tmp_path / "out"
    first = (out / "scalar_cos_converge.csv").read_bytes()
    assert cli.main(["converge", "--scenario", sc]) == 0
    assert (out / "scalar_cos_converge.csv").read_bytes() == first
    doc = json.loads((out / "scalar_cos_converge.json").read_text())
    assert doc["bound_formula"] == "multi_periodic"
    for row in doc["rows"]:
        assert row["empirical_error"] <= row["theoretical_bound"]
        assert row["empirical_error"] == pytest.approx(row["eps"] / (2 * math.pi), rel=0.05)
    dat = (out / "scalar_cos_converge.dat").read_text().splitlines()
    assert dat[0].startswith("#") and len(dat) == 3


def test_simulate_byte_identical_for_fixed_seed(tmp_path):
    sc = _scenario(tmp_path, seed=11)
    out = tmp_path / "out"
    assert cli.main(["simulate", "--scenario", sc]) == 0
    names = sorted(p.name for p in out.glob("*.csv"))
    assert names == ["scalar_cos_eps0.25_averaged.csv", "scalar_cos_eps0.25_original.csv",
                     "scalar_cos_eps0.5_averaged.csv", "scalar_cos_eps0.5_original.csv"]
    snap = {n: (out / n).read_bytes() for n in names}
    assert cli.main(["simulate", "--scenario", sc]) == 0
    assert all((out / n).read_bytes() == b for n, b in snap.items())
    doc = json.loads((out / "scalar_cos_simulate.json").read_text())
    assert doc["reproducibility"]["seed"] == 11
    for run in doc["runs"]:
        assert run["sup_distance"] <= run["certificate"] + 1e-12


def test_fit_slope():
    eps = [0.2, 0.1, 0.05, 0.025]
    slope, half = cli.fit_slope(eps, [3 * e for e in eps])
    assert slope == pytest.approx(1.0) and half == pytest.approx(0.0, abs=1e-9)
    assert cli.fit_slope(eps, [0.0] * 4) == (None, None)


def test_module_entry_point(tmp_path):
    env = dict(os.environ, INCAVG_BACKEND="numpy")
    res = subprocess.run([sys.executable, "-m", "incavg", "bound", "--system", "nope"],
                         capture_output=True, text=True, env=env)
    assert res.returncode == 2


def test_example55_report(tmp_path, capsys):
    sc = _scenario(tmp_path, system="example_5_5")
    assert cli.main(["example55", "--scenario", sc]) == 0
    out = tmp_path / "out"
    rep = json.loads((out / "example_5_5_report.json").read_text())
    assert rep["alpha_closed_form"] == pytest.approx(8 / math.pi**2)
    assert rep["alpha_printed"] == 0.815
    assert rep["bound_coefficients"]["formula-derived"] == pytest.approx(180.1338, abs=1e-4)
    assert rep["bound_coefficients"]["paper-printed"] == pytest.approx(57.3384, abs=1e-4)
    assert (rep["M_H"], rep["K_H"]) == pytest.approx((math.sqrt(10), math.sqrt(2)))
    for row in rep["convergence"]["rows"]:
        assert row["empirical_error"] <= row["theoretical_bound"]
        assert row["reach_error"] <= row["theoretical_bound"]
    text = (out / "example_5_5_summary.txt").read_text()
    assert "formula-derived" in text and "estimator" in text
    assert "alpha" in capsys.readouterr().out
