import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from stochgrowth.cli import DEFAULT_CONFIG, config_digest, load_config, main
from stochgrowth.errors import ConfigError

SMALL_SIM = {"simulate": {"horizon": 20, "burn_in": 100, "n_samples": 2000, "ks_threshold": 0.1}}
SMALL_KIN = {
    "kinetics": {"grid": {"lo": 0.0, "hi": 20.0, "dx": 0.05}, "horizon": 2.0, "snapshots": 3},
}
SYNTH = {"synth": {"n_income": 100_000}}


def write_config(tmp_path, cfg, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return str(p)


def run(tmp_path, cfg, command, *extra, out="out"):
    out_dir = tmp_path / out
    code = main(["--config", write_config(tmp_path, cfg), "--out", str(out_dir), command, *extra])
    return code, out_dir


def manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


# --- config -----------------------------------------------------------------


def test_defaults_and_seed_override():
    cfg = load_config(None, 17)
    assert cfg["seed"] == 17
    assert cfg["kinetics"]["alpha"] == DEFAULT_CONFIG["kinetics"]["alpha"]


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(write_config(tmp_path, {"simulate": {"horizn": 3}}), None)
    assert "simulate.horizn" in str(err.value)


def test_config_digest_is_order_independent():
    assert config_digest({"a": 1, "b": [1, 2]}) == config_digest({"b": [1, 2], "a": 1})


# --- simulate ---------------------------------------------------------------


def test_simulate_manifest_lists_three_files(tmp_path):
    code, out = run(tmp_path, SMALL_SIM, "simulate")
    assert code == 0
    m = manifest(out)
    names = sorted(Path(p).name for p in m["outputs"])
    assert names == ["ks_report.json", "stationary.csv", "trajectory.csv"]
    assert all(Path(p).exists() for p in m["outputs"])
    assert m["command"] == "simulate" and m["seed"] == 0


def test_simulate_reruns_byte_identical(tmp_path):
    _, a = run(tmp_path, SMALL_SIM, "simulate", out="a")
    _, b = run(tmp_path, SMALL_SIM, "simulate", out="b")
    for name in ("trajectory.csv", "stationary.csv", "ks_report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_flag_changes_outputs(tmp_path):
    _, a = run(tmp_path, SMALL_SIM, "simulate", out="a")
    code = main(["--config", write_config(tmp_path, SMALL_SIM), "--seed", "5", "--out", str(tmp_path / "b"), "simulate"])
    assert code == 0
    assert (a / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert manifest(tmp_path / "b")["seed"] == 5


def test_simulate_bad_bounds_exit_code(tmp_path, capsys):
    cfg = {**SMALL_SIM, "economy": {"state_bounds": [2.0, 0.0]}}
    code, out = run(tmp_path, cfg, "simulate")
    assert code != 0
    assert "state_bounds" in capsys.readouterr().err
    assert not (out / "manifest.json").exists()


# --- kinetics ---------------------------------------------------------------


def test_kinetics_residual_report(tmp_path):
    code, out = run(tmp_path, {"kinetics": {**SMALL_KIN["kinetics"], "horizon": 15.0}}, "kinetics")
    assert code == 0
    names = sorted(Path(p).name for p in manifest(out)["outputs"])
    assert names == ["density_snapshots.csv", "mean_field.csv", "residual_report.json"]
    rep = json.loads((out / "residual_report.json").read_text())
    assert rep["passed"] and rep["residual_final"] < rep["threshold"]


def test_kinetics_zero_dynamics_echoes_initial(tmp_path):
    cfg = {"kinetics": {**SMALL_KIN["kinetics"], "alpha": 0.0, "drift": 0.0}}
    code, out = run(tmp_path, cfg, "kinetics")
    assert code == 0
    rows = np.genfromtxt(out / "density_snapshots.csv", delimiter=",", names=True)
    times = np.unique(rows["t"])
    assert times.size == 3
    first = rows["p"][rows["t"] == times[0]]
    for t in times[1:]:
        np.testing.assert_allclose(rows["p"][rows["t"] == t], first, rtol=1e-14, atol=0)


def test_kinetics_gamma_figure(tmp_path):
    code, out = run(tmp_path, {"kinetics": {"mode": "gamma_figure"}}, "kinetics")
    assert code == 0
    header = (out / "gamma_figure.csv").read_text().splitlines()[0]
    assert header == "x,gamma_a1.8_b0.09,gamma_a1.6_b0.04"


def test_kinetics_cfl_violation_reports_dt(tmp_path, capsys):
    code, _ = run(tmp_path, {"kinetics": {**SMALL_KIN["kinetics"], "dt": 1.0}}, "kinetics")
    assert code == 2
    assert "dt <=" in capsys.readouterr().err


# --- synth and estimate -----------------------------------------------------


def test_synth_then_estimate_recovers_truth(tmp_path):
    code, syn = run(tmp_path, SYNTH, "synth", out="syn")
    assert code == 0
    code, est = run(
        tmp_path, SYNTH, "estimate",
        "--gdp", str(syn / "gdp.csv"), "--income", str(syn / "income.csv"), "--truth", str(syn / "truth.json"),
        out="est",
    )
    assert code == 0
    names = {Path(p).name for p in manifest(est)["outputs"]}
    assert {"gamma_path.csv", "results.json", "recovery.json", "table1_eq1_log.csv", "filter_path.csv"} <= names
    rec = json.loads((est / "recovery.json").read_text())
    assert rec["beta_max_rel_error"] < 0.03
    assert rec["all_green"]


def test_estimate_missing_file_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, {}, "estimate", "--gdp", str(tmp_path / "none.csv"), "--income", str(tmp_path / "x.csv"))
    assert code == 3
    assert "none.csv" in capsys.readouterr().err
