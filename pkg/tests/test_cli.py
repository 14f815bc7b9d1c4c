import json
import math

import numpy as np
import pytest
from typer.testing import CliRunner

from repeater_budget import create_app
from repeater_budget.features.resonance.core import lorentzian
from repeater_budget.utils.config_loader import load_csv, save_csv

runner = CliRunner()

SMALL_SCENARIO = {
    "emitter": "SnV",
    "repeater": {"l_km": 102, "l_min_km": 2, "n_ph_max": 100, "eps_r": 1e-3},
    "sweep": {"eta_from": 0.9, "eta_to": 0.95, "steps": 3},
}
SMALL_MC = {"delta_n": 100, "n_min": 500}


def invoke(*args):
    return runner.invoke(create_app(), ["--quiet", "--threads", "1", *[str(a) for a in args]])


def error_of(result):
    lines = [l for l in result.output.splitlines() if l.startswith("{")]
    assert lines, result.output
    return json.loads(lines[-1])


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def scenario(tmp_path):
    return write_json(tmp_path / "scenario.json", SMALL_SCENARIO)


def test_help_lists_every_command():
    result = runner.invoke(create_app(), ["--help"])
    assert result.exit_code == 0
    for name in ("budget", "optimize", "sweep", "bo", "uq", "resfit"):
        assert name in result.output


def test_budget(tmp_path):
    out = tmp_path / "budget.json"
    result = invoke("budget", "--emitter", "SnV", "--table", "--out", out)
    assert result.exit_code == 0, result.output
    doc = json.loads(out.read_text())
    assert doc["eta_emitter"] == pytest.approx(0.8859, abs=1e-3)
    assert doc["tau_ns"] == pytest.approx(0.225, rel=1e-2)
    assert {r["emitter"] for r in doc["table"]} >= {"NV", "SnV"}


def test_optimize(tmp_path, scenario):
    out = tmp_path / "opt.json"
    result = invoke("optimize", "--scenario", scenario, "--eta", 0.9, "--out", out)
    assert result.exit_code == 0, result.output
    doc = json.loads(out.read_text())
    opt = doc["optimum"]
    assert doc["eta_emitter"] == 0.9
    assert opt["N_ph"] == opt["b0"] * (1 + opt["b1"] * (1 + opt["b2"]))
    assert opt["N_ph"] <= 100 and 1 <= opt["m"] <= 50
    assert math.isfinite(opt["cost"])


def test_sweep(tmp_path, scenario):
    out = tmp_path / "sweep.csv"
    result = invoke("sweep", "--scenario", scenario, "--out", out)
    assert result.exit_code == 0, result.output
    rows = load_csv(str(out))
    assert [float(r["eta_emitter"]) for r in rows] == pytest.approx([0.9, 0.925, 0.95])
    assert all(r["error"] == "" for r in rows)
    costs = [float(r["cost"]) for r in rows]
    assert costs == sorted(costs, reverse=True)


def test_bo_run(tmp_path):
    out = tmp_path / "trace.csv"
    result = invoke("bo", "run", "--objective", "builtin:quadratic", "--dim", 1, "--budget", 8, "--out", out)
    assert result.exit_code == 0, result.output
    rows = load_csv(str(out))
    assert len(rows) == 8
    f_min = [float(r["f_min"]) for r in rows]
    assert f_min == sorted(f_min, reverse=True)


def test_bo_unknown_objective():
    result = invoke("bo", "run", "--objective", "builtin:quadratik")
    assert result.exit_code == 1
    err = error_of(result)
    assert err["error"] == "ValidationError"
    assert "builtin:quadratic" in err["message"]


def test_uq_train_and_study(tmp_path):
    x = np.linspace(0.0, 10.0, 15)
    data = tmp_path / "train.csv"
    save_csv(str(data), [{"x0": float(a), "y": float(np.sin(a))} for a in x], ("x0", "y"))
    model = tmp_path / "model.json"
    result = invoke("uq", "train", "--data", data, "--out", model)
    assert result.exit_code == 0, result.output
    assert model.exists()

    device = write_json(tmp_path / "device.json", {"mean": [5.0], "std": [1.0]})
    config = write_json(tmp_path / "mc.json", SMALL_MC)
    out = tmp_path / "report.json"
    result = invoke("uq", "study", "--model", model, "--device", device, "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    doc = json.loads(out.read_text())
    assert doc["p16"] <= doc["p50"] <= doc["p84"]
    assert doc["n_total"] >= 100

    wrong = write_json(tmp_path / "device2.json", {"mean": [0.0, 0.0], "std": [1.0, 1.0]})
    result = invoke("uq", "study", "--model", model, "--device", wrong, "--out", out)
    assert result.exit_code == 1
    assert error_of(result)["field"] == "device"


def test_uq_e2e_is_reproducible(tmp_path):
    device = write_json(tmp_path / "device.json", {"mean": [0.0, 0.0], "std": [1.0, 1.0]})
    config = write_json(tmp_path / "mc.json", SMALL_MC)
    docs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        result = invoke("uq", "e2e", "--function", "builtin:sumsq", "--device", device, "--w-train", 30,
                        "--kappa", 1.5, "--config", config, "--seed", 4, "--out", out)
        assert result.exit_code == 0, result.output
        docs.append(json.loads(out.read_text()))
    assert docs[0] == docs[1]
    assert docs[0]["seed"] == 4
    assert docs[0]["meta"]["function"] == "builtin:sumsq"
    assert docs[0]["meta"]["w_train"] == 30


def test_resfit(tmp_path):
    nu0, fwhm = 484.47e12, 10e9
    nu = nu0 + np.linspace(-30e9, 30e9, 13)
    data = tmp_path / "scan.csv"
    save_csv(str(data), [{"frequency_hz": float(a), "transmission": float(lorentzian(a, nu0, fwhm, 0.9, 0.05))}
                         for a in nu], ("frequency_hz", "transmission"))
    out = tmp_path / "fit.json"
    result = invoke("resfit", "--in", data, "--out", out)
    assert result.exit_code == 0, result.output
    doc = json.loads(out.read_text())
    assert doc["nu0"] == pytest.approx(nu0, abs=1e3)
    assert doc["q"] == pytest.approx(nu0 / fwhm, rel=1e-6)
    assert doc["n_points"] == 13 and doc["fit_offset"] is True


def test_resfit_degenerate(tmp_path):
    data = tmp_path / "flat.csv"
    save_csv(str(data), [{"frequency_hz": 1e14 + i * 1e9, "transmission": 0.5} for i in range(5)],
             ("frequency_hz", "transmission"))
    result = invoke("resfit", "--in", data, "--out", tmp_path / "fit.json")
    assert result.exit_code == 1
    assert error_of(result)["error"] == "DegenerateDataError"


def test_missing_scenario_file(tmp_path):
    result = invoke("optimize", "--scenario", tmp_path / "nope.json", "--eta", 0.9)
    assert result.exit_code == 1
    assert error_of(result)["error"] == "ConfigError"


def test_unknown_scenario_key(tmp_path):
    path = write_json(tmp_path / "bad.json", {"repeater": {"l_kmm": 100}})
    result = invoke("optimize", "--scenario", path, "--eta", 0.9)
    assert result.exit_code == 1
    err = error_of(result)
    assert err["field"] == "scenario.repeater.l_kmm"
    assert "l_km" in err["message"]


def test_optimize_is_reproducible(tmp_path, scenario):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"opt{threads}.json"
        result = runner.invoke(create_app(), ["--quiet", "--threads", threads, "optimize",
                                              "--scenario", scenario, "--eta", "0.93", "--out", str(out)])
        assert result.exit_code == 0, result.output
        outs.append(json.loads(out.read_text()))
    assert outs[0] == outs[1]


def test_optimize_writes_run_log(tmp_path, scenario, monkeypatch):
    log = tmp_path / "run.jsonl"
    monkeypatch.setenv("REPEATER_BUDGET_LOG", str(log))
    result = invoke("optimize", "--scenario", scenario, "--eta", 0.9)
    assert result.exit_code == 0, result.output
    entry = json.loads(log.read_text().splitlines()[-1])
    assert entry["type"] == "optimize"
    assert entry["meta"]["eta_emitter"] == 0.9
    assert entry["meta"]["N_ph"] <= 100


def test_global_out_is_the_fallback_path(tmp_path, scenario):
    out = tmp_path / "global.json"
    result = runner.invoke(create_app(), ["--quiet", "--threads", "1", "--out", str(out),
                                          "optimize", "--scenario", scenario, "--eta", "0.9"])
    assert result.exit_code == 0, result.output
    assert json.loads(out.read_text())["eta_emitter"] == 0.9

    local = tmp_path / "local.json"
    result = runner.invoke(create_app(), ["--quiet", "--threads", "1", "--out", str(tmp_path / "unused.json"),
                                          "budget", "--emitter", "SnV", "--out", str(local)])
    assert result.exit_code == 0, result.output
    assert local.exists() and not (tmp_path / "unused.json").exists()


def test_bo_run_reruns_are_byte_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        result = runner.invoke(create_app(), ["--quiet", "--threads", "1", "--seed", "5", "bo", "run",
                                              "--objective", "builtin:branching", "--dim", "1",
                                              "--budget", "10", "--out", str(out)])
        assert result.exit_code == 0, result.output
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_uq_train_and_study_reruns_are_byte_identical(tmp_path):
    x = np.linspace(-2.0, 2.0, 12)
    data = tmp_path / "train.csv"
    save_csv(str(data), [{"x0": float(a), "y": float(a * a)} for a in x], ("x0", "y"))
    device = write_json(tmp_path / "device.json", {"mean": [0.0], "std": [0.5]})
    config = write_json(tmp_path / "mc.json", SMALL_MC)
    models, reports = [], []
    for run in ("a", "b"):
        model = tmp_path / f"model_{run}.json"
        report = tmp_path / f"report_{run}.json"
        result = invoke("uq", "train", "--data", data, "--out", model)
        assert result.exit_code == 0, result.output
        result = invoke("uq", "study", "--model", model, "--device", device, "--config", config, "--out", report)
        assert result.exit_code == 0, result.output
        models.append(model.read_bytes())
        reports.append(report.read_bytes())
    assert models[0] == models[1]
    assert reports[0] == reports[1]
