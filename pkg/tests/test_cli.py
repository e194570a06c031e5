import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from laserlab import analytic, cli
from laserlab.export import read_csv

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PARAMS = {"g": 1.0, "kappa": 16.0, "pump_rate": 0.0625, "n_atoms": 100}
# fast parameters (mu = 3, kappa = 2) for stochastic commands
FAST = {"g": 1.0, "kappa": 2.0, "pump_rate": 0.5, "n_atoms": 40}


def write_config(tmp_path, **blocks):
    doc = {"params": dict(PARAMS)}
    doc.update(blocks)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return str(path)


def data_lines(path):
    return [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]


def test_report(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["report", "--config", write_config(tmp_path), "--out", str(out), "--self-check"]) == 0
    doc = json.loads(out.read_text())
    rep = doc["report"]
    assert rep["squeezing"] == 0.5
    assert rep["regime"] == "BelowThreshold"
    assert doc["metadata"]["params"] == PARAMS
    assert doc["metadata"]["self_check"] == {"analytic": "ok"}


def test_report_threshold_config(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["report", "--config", str(CONFIGS / "threshold.json"), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())["report"]
    assert rep["regime"] == "AtThreshold"
    assert rep["nbar"] == pytest.approx(2 / 3 * 0.01 * 90, rel=1e-14)


def test_sweep_argmax_and_columns(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--config", str(CONFIGS / "eta4.json"), "--out", str(out),
                     "--self-check", "--workers", "4"]) == 0
    meta, cols, data = read_csv(out)
    assert cols == ["eta", "S", "nbar_over_N", "nvar_ratio"]
    assert data.shape == (401, 4)
    best = data[np.argmax(data[:, 1]), 0]
    assert best == data[np.argmin(np.abs(np.log(data[:, 0] / 4.0))), 0]
    assert np.allclose(data[:, 3], (3 * data[:, 0] + 2) / 4, rtol=1e-12)
    assert meta["command"] == "sweep"


def test_sweep_deterministic(tmp_path):
    cfg = write_config(tmp_path, sweep={"eta": [0.5, 1.0, 4.0]})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["sweep", "--config", cfg, "--out", str(a)])
    cli.main(["sweep", "--config", cfg, "--out", str(b), "--workers", "3"])
    assert data_lines(a) == data_lines(b)


def test_dynamics_csv(tmp_path):
    cfg = write_config(tmp_path, dynamics={"t_end": 50.0, "dt": 0.01, "sample_every": 100})
    out = tmp_path / "d.csv"
    assert cli.main(["dynamics", "--config", cfg, "--out", str(out), "--self-check"]) == 0
    meta, cols, data = read_csv(out)
    assert tuple(cols) == ("t", "na", "nb", "nc", "re_ma", "im_ma", "re_m", "im_m",
                           "re_b", "im_b", "mdm", "madma")
    assert data[0, 3] == 100 and data[-1, 0] == pytest.approx(50.0)
    assert meta["trajectory"]["n_steps"] == 5000


def test_gillespie_json(tmp_path):
    cfg = write_config(tmp_path, seed=3, gillespie={"t_end": 1500.0, "burn_in": 100.0})
    out = tmp_path / "g.json"
    assert cli.main(["gillespie", "--config", cfg, "--out", str(out), "--self-check"]) == 0
    doc = json.loads(out.read_text())
    names = [r["estimator"] for r in doc["records"]]
    assert names == ["na", "nb", "nc", "frac_a", "frac_b", "frac_c"]
    for rec in doc["records"]:
        assert {"mean", "std_error", "n_samples", "effective_samples", "config"} <= set(rec)
    assert doc["metadata"]["seed"] == 3
    assert doc["metadata"]["rng"]["generator"]


def test_seed_override_and_determinism(tmp_path):
    cfg = write_config(tmp_path, seed=3, gillespie={"t_end": 300.0, "burn_in": 50.0})
    outs = []
    for name, seed in (("a", "9"), ("b", "9"), ("c", "10")):
        out = tmp_path / f"{name}.json"
        assert cli.main(["gillespie", "--config", cfg, "--out", str(out), "--seed", seed]) == 0
        outs.append(json.loads(out.read_text())["records"])
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_langevin_and_correlate(tmp_path):
    doc = {"params": FAST, "seed": 1,
           "langevin": {"n_traj": 500, "t_end": 20.0, "dt": 0.003},
           "correlate": {"n_traj": 500, "tau": [0, 0.5, 1.0]}}
    path = tmp_path / "f.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "l.json"
    assert cli.main(["langevin", "--config", str(path), "--out", str(out), "--self-check"]) == 0
    recs = {r["estimator"]: r for r in json.loads(out.read_text())["records"]}
    assert {"mdm", "madma", "bdb", "bbdag_proxy", "m", "ma"} <= set(recs)
    # complex estimators serialise as [re, im]
    assert len(recs["m"]["mean"]) == 2 and isinstance(recs["mdm"]["mean"], float)
    out = tmp_path / "c.csv"
    assert cli.main(["correlate", "--config", str(path), "--out", str(out), "--workers", "2"]) == 0
    meta, cols, data = read_csv(out)
    assert cols == ["tau", "re_corr", "im_corr", "std_error", "model", "deviation_se"]
    assert data.shape == (3, 6)
    assert meta["bdb_ss"] < meta["bdb_slaved"]


def test_band_and_spectrum(tmp_path):
    cfg = write_config(tmp_path, band={"lambda": [0, 0.16, 16, 1600]},
                       spectrum={"omega_max": 40.0, "num": 81})
    out = tmp_path / "b.csv"
    assert cli.main(["band", "--config", cfg, "--out", str(out), "--self-check"]) == 0
    _, cols, data = read_csv(out)
    assert cols == ["lambda", "z", "var_minus_band", "squeezing_band"]
    assert np.all(np.abs(data[:, 3] - 0.5) <= 1e-12)
    out = tmp_path / "sp.csv"
    assert cli.main(["spectrum", "--config", cfg, "--out", str(out), "--self-check"]) == 0
    _, cols, data = read_csv(out)
    assert data.shape == (81, 2)
    assert np.array_equal(data[:, 1], data[::-1, 1])


@pytest.mark.parametrize("doc", [
    {"params": {"g": 1, "kappa": 16, "pump_rate": 0.0625}},
    {"params": dict(PARAMS), "bogus": 1},
    {"params": dict(PARAMS, n_atoms=100.5)},
    {"params": dict(PARAMS, g=-1)},
    {"params": dict(PARAMS), "sweep": {"eta": {"start": 0, "stop": 1, "num": 3, "log": True}}},
])
def test_config_errors_exit_2(tmp_path, doc, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    cmd = "sweep" if "sweep" in doc else "report"
    assert cli.main([cmd, "--config", str(path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_block_and_file(tmp_path):
    assert cli.main(["gillespie", "--config", write_config(tmp_path)]) == 2
    assert cli.main(["report", "--config", str(tmp_path / "nope.json")]) == 2
    (tmp_path / "x.json").write_text("{not json")
    assert cli.main(["report", "--config", str(tmp_path / "x.json")]) == 2
    assert cli.main(["report", "--config", write_config(tmp_path), "--seed", "-1"]) == 2


def test_divergence_exit_3(tmp_path):
    cfg = write_config(tmp_path, dynamics={"t_end": 1e5, "dt": 50.0, "sample_every": 1})
    with np.errstate(over="ignore", invalid="ignore"):
        assert cli.main(["dynamics", "--config", cfg, "--out", str(tmp_path / "d.csv")]) == 3


def test_self_check_failure_exit_4(tmp_path, monkeypatch):
    monkeypatch.setattr(analytic, "photon_variance_closed_form", lambda p: 1.0)
    assert cli.main(["report", "--config", write_config(tmp_path), "--self-check"]) == 4


def test_entry_point_subprocess(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "laserlab", "report", "--config",
                           str(CONFIGS / "eta4.json")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["report"]["squeezing"] == 0.5
