import json
import shutil
import subprocess

import jsonschema
import numpy as np
import pytest

from superradiance import cli, runner
from superradiance.dynamics import DecayRates
from superradiance.dynamics import build_generator as real_build_generator
from superradiance.io import load_schema


def _json(path):
    return json.loads(path.read_text())


def test_simulate_writes_artifacts(tmp_path):
    assert cli.main(["simulate", "--gamma1", "1", "--gamma2", "0.1", "--n", "12",
                     "--out", str(tmp_path)]) == 0
    summary = _json(tmp_path / "run_N0012.json")
    jsonschema.validate(summary, load_schema("run_summary"))
    assert summary["record"]["area1_inf"] == pytest.approx(12, rel=1e-5)
    assert summary["record"]["area2_inf"] == pytest.approx(12, rel=1e-5)
    header = (tmp_path / "run_N0012.csv").read_text().splitlines()[0]
    assert header == "t,I1,I2,A1,A2,tau1,tau2,sigma1,sigma2,P_ground"


def test_simulate_reduced_model_silences_mode2(tmp_path):
    assert cli.main(["simulate", "--gamma1", "1", "--gamma2", "0", "--n", "20",
                     "--init", "two-level-conventional", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "run_N0020.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[2]) == 0.0 for r in rows)


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "0"],
    ["simulate", "--n", "3", "--gamma1", "0", "--gamma2", "0"],
    ["simulate", "--n", "3", "--init", "sideways"],
    ["simulate", "--n", "3", "--rel-tol", "-1"],
    ["sweep", "--n-min", "5", "--n-max", "10", "--n-step", "0"],
    ["sweep", "--n-min", "5", "--n-max", "10", "--threads", "0"],
    ["synthesis", "--n", "10", "--gamma1", "1", "--gamma2", "0"],
    ["verify", "--max-n", "8", "--dim-cap", "100"],
    ["frobnicate"],
    [],
])
def test_validation_exit_1(argv, tmp_path):
    argv = argv + (["--out", str(tmp_path)] if argv[:1] in (["simulate"], ["sweep"]) else [])
    assert cli.main(argv) == 1


def test_analyze_missing_or_corrupt(tmp_path):
    assert cli.main(["analyze", str(tmp_path)]) == 1
    (tmp_path / "sweep_summary.json").write_text("[]")
    assert cli.main(["analyze", str(tmp_path)]) == 1


def test_scenario_file_and_unknown_keys(tmp_path):
    good = {"gamma1": 1.0, "gamma2": 0.5, "n_values": {"min": 3, "max": 5, "step": 1},
            "init": "v-standard", "solver": {"rel_tol": 1e-8, "t_max": "auto"}}
    (tmp_path / "s.json").write_text(json.dumps(good))
    out = tmp_path / "out"
    assert cli.main(["sweep", "--scenario", str(tmp_path / "s.json"), "--out", str(out),
                     "--threads", "1"]) == 0
    assert len(_json(out / "sweep_summary.json")["records"]) == 3
    bad = dict(good, colour="blue")
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    assert cli.main(["simulate", "--scenario", str(tmp_path / "bad.json"), "--n", "3",
                     "--out", str(out)]) == 1
    assert cli.main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--n", "3"]) in (1, 3)


def test_sweep_analyze_pipeline(tmp_path):
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--gamma1", "1", "--gamma2", "0", "--init", "two-level-conventional",
                     "--n-min", "10", "--n-max", "30", "--n-step", "5", "--out", str(out),
                     "--threads", "1"]) == 0
    jsonschema.validate(_json(out / "sweep_summary.json"), load_schema("sweep_summary"))
    assert cli.main(["analyze", str(out), "--alpha-offset", "0.5"]) == 0
    report = _json(out / "analysis_report.json")
    jsonschema.validate(report, load_schema("fit_report"))
    tau_fit = next(f for f in report["fits"] if f["y_label"] == "tau1_inf")
    assert tau_fit["r_squared"] >= 0.995
    surface = (out / "normalized_surface.csv").read_text().splitlines()
    assert surface[0] == "n_half,t,tau_d,i1_norm,i2_norm,t_display"
    assert (out / "sigma_minima.csv").exists()


def test_synthesis_formula_only(tmp_path, capsys):
    assert cli.main(["synthesis", "--n", "300", "--gamma1", "1", "--gamma2", "0.1",
                     "--formula-only"]) == 0
    rep = json.loads(capsys.readouterr().out)
    jsonschema.validate(rep, load_schema("synthesis_report"))
    assert rep["cascade_sum"] == pytest.approx(0.2303, abs=5e-5)


def test_synthesis_with_run(tmp_path):
    path = tmp_path / "syn.json"
    assert cli.main(["synthesis", "--n", "40", "--gamma1", "1", "--gamma2", "0.1",
                     "--out", str(path)]) == 0
    rep = _json(path)
    assert rep["mode1_peak_time"] < rep["mode2_peak_time"] and rep["speedup"] > 1


def test_verify_passes(tmp_path):
    path = tmp_path / "v.json"
    assert cli.main(["verify", "--max-n", "3", "--out", str(path)]) == 0
    rep = _json(path)
    jsonschema.validate(rep, load_schema("verify_report"))
    assert rep["passed"] and rep["max_deviation"] <= 1e-8


def test_verify_catches_injected_rate_bug(monkeypatch):
    def skewed(space, rates):
        return real_build_generator(space, DecayRates(rates.gamma1 * 1.001, rates.gamma2))

    monkeypatch.setattr(runner, "build_generator", skewed)
    assert cli.main(["verify", "--max-n", "2"]) == 2


def test_sweep_partial_failure_exit_2(tmp_path):
    out = tmp_path / "sw"
    # N=1 needs under 200 steps, N=6 about 300
    scen = {"gamma1": 1.0, "gamma2": 1.0, "n_values": [1, 6], "solver": {"max_steps": 250}}
    (tmp_path / "s.json").write_text(json.dumps(scen))
    code = cli.main(["sweep", "--scenario", str(tmp_path / "s.json"), "--out", str(out),
                     "--threads", "1"])
    data = _json(out / "sweep_summary.json")
    assert code == 2 and data["failed"] == [6]
    assert [r["status"] for r in data["records"]] == ["ok", "failed"]


def test_determinism_across_thread_counts(tmp_path):
    base = ["sweep", "--gamma1", "1", "--gamma2", "0.5", "--n-min", "4", "--n-max", "12",
            "--n-step", "4"]
    outs = []
    for i, threads in enumerate(["1", "1", "2"]):
        out = tmp_path / f"r{i}"
        assert cli.main(base + ["--out", str(out), "--threads", threads]) == 0
        outs.append(out)
    for name in ("sweep_summary.json", "sweep_summary.csv", "run_N0008.csv"):
        blobs = {(o / name).read_bytes() for o in outs}
        assert len(blobs) == 1, name


@pytest.mark.skipif(shutil.which("superradiance") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["superradiance", "simulate", "--n", "0"], capture_output=True, text=True)
    assert proc.returncode == 1 and "error" in proc.stderr
