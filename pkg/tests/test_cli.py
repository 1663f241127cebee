import csv
import json
import os
import re

import numpy as np
import pytest

from relaysim import cli
from relaysim.detectors import ses_zf_detect
from relaysim.harness import ExperimentPlan
from relaysim.model import default_config

HERE = os.path.dirname(__file__)
PLANS = os.path.join(HERE, os.pardir, "plans")


def tiny_plan(tmp_path, **over):
    d = json.load(open(os.path.join(PLANS, "quick.json")))
    d.update({"L_grid": [1, 2], "snr_grid": [5, 25], "frames": 4, "sampler": {"N": 1200, "burn_in": 400},
              "abc": {"covariance_draws": 200}})
    d["tolerance"].update({"epsilons": [1.0], "baseline_N": 1500, "N": 1000, "burn_in": 300, "datasets": 1, "max_lag": 10})
    d.update(over)
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(d))
    return str(p)


def run(*argv):
    return cli.main([str(a) for a in argv] + ["--quiet"])


def test_sweep_determinism_across_threads(tmp_path):
    plan = tiny_plan(tmp_path)
    assert run("sweep", "--config", plan, "--out", tmp_path / "a", "--threads", 1) == 0
    assert run("sweep", "--config", plan, "--out", tmp_path / "b", "--threads", 2) == 0
    assert (tmp_path / "a/ser.csv").read_bytes() == (tmp_path / "b/ser.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a/ser.csv")))
    assert len(rows) == 2 * 2 * 3
    meta = json.load(open(tmp_path / "a/meta.json"))
    assert meta["seed"] == 0 and "wall_times" in meta and "flags" in meta
    assert run("sweep", "--config", plan, "--out", tmp_path / "c", "--seed", 5) == 0
    assert (tmp_path / "c/ser.csv").read_bytes() != (tmp_path / "a/ser.csv").read_bytes()


def test_default_plan_file_validates():
    data = cli.load_plan_json(os.path.join(PLANS, "default.json"))
    plan = ExperimentPlan.from_dict(data)
    assert plan.L_grid == (1, 2, 5, 10) and plan.frames == 2000
    assert plan.snr_grid == (0, 5, 10, 15, 20, 25, 30)


def test_simulate_then_detect(tmp_path):
    plan = tiny_plan(tmp_path)
    assert run("simulate", "--config", plan, "--out", tmp_path, "--frames", 3) == 0
    frames = cli.read_frames(tmp_path / "frames.csv", ExperimentPlan.from_dict(json.load(open(plan))).config)
    assert len(frames) == 3
    for method in ("ses-zf", "omap", "mcmc-abc", "mcmc-av"):
        assert run("detect", "--config", plan, "--out", tmp_path, "--input", tmp_path / "frames.csv",
                   "--method", method) == 0
        rows = list(csv.DictReader(open(tmp_path / "detections.csv")))
        assert len(rows) == 3 and all(r["method"] == method for r in rows)


def test_detect_ses_zf_on_noiseless_frame(tmp_path):
    cfg = default_config(L=1)
    d = {"config": {**cfg.to_dict(), "noise": {"sigma_w_sq": 1e-12, "sigma_v_sq": 1e-12}}}
    p = tmp_path / "p.json"
    p.write_text(json.dumps(d))
    # hand-written frame: s = [1, -1] (index 9), h = g = 1, no noise, so y = tanh(s)
    y = [float(v) for v in np.tanh([1.0, -1.0])]
    lines = [",".join(cli.FRAME_FIELDS)]
    for k in range(2):
        lines.append(f"0,0,{k},{y[k]!r},0.0,9,{[1.0, -1.0][k]},1.0,0.0,1.0,0.0,0.0,0.0")
    (tmp_path / "frames.csv").write_text("\n".join(lines) + "\n")
    assert run("detect", "--config", p, "--out", tmp_path / "o", "--input", tmp_path / "frames.csv") == 0
    row = next(csv.DictReader(open(tmp_path / "o/detections.csv")))
    assert row["s_index"] == "9" and row["symbols"] == "1.0 -1.0"
    cfg_run = ExperimentPlan.from_dict(d).config
    assert ses_zf_detect(np.array([y], dtype=complex), cfg_run).s_index == 9


def test_plot_one_polyline_per_detector(tmp_path):
    (tmp_path / "ser.csv").write_text(
        "L,snr_db,detector,frames,errors,ser,failures,config_hash,seed,scales,epsilon\n"
        "5,0.0,ses-zf,10,4,0.2,0,x,0,,nan\n"
        "5,10.0,ses-zf,10,2,0.1,0,x,0,,nan\n"
        "5,10.0,omap,10,1,0.05,0,x,0,,nan\n")
    assert run("plot", "--out", tmp_path) == 0
    svg = (tmp_path / "ser.svg").read_text()
    assert svg.count("<polyline") == 2
    assert "ses-zf" in svg and "omap" in svg


def test_plot_without_inputs_fails_cleanly(tmp_path):
    assert run("plot", "--out", tmp_path / "none") == 1
    assert not (tmp_path / "none").exists()


def test_tune_and_tolerance_study(tmp_path):
    plan = tiny_plan(tmp_path, L_grid=[1], snr_grid=[10], sampler={"N": 1200, "burn_in": 400, "tune": True})
    assert run("tune", "--config", plan, "--out", tmp_path) == 0
    sc = json.load(open(tmp_path / "scales.json"))
    assert len(sc["cells"]) == 1 and len(sc["cells"][0]["abc"]) == 2
    assert run("tolerance-study", "--config", plan, "--out", tmp_path) == 0
    for name in ("acf.csv", "edf.csv", "edf_grid.csv", "meta.json"):
        assert (tmp_path / name).exists()
    assert run("plot", "--out", tmp_path) == 0
    assert (tmp_path / "acf.svg").exists() and (tmp_path / "edf_error.svg").exists()


@pytest.mark.parametrize("payload, needle", [
    ({"frames": 0}, "field frames"),
    ({"detectors": ["bogus"]}, "field detectors/0"),
    ({"abc": {"metric": "cosine"}}, "field abc/metric"),
    ({"unknown_key": 1}, "field (root)"),
])
def test_schema_errors_exit_2_without_output(tmp_path, capsys, payload, needle):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(payload))
    assert run("sweep", "--config", p, "--out", tmp_path / "out") == 2
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_malformed_json_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "frames": 3,\n  oops\n}')
    assert run("sweep", "--config", p, "--out", tmp_path / "out") == 2
    assert re.search(r"bad\.json:3:\d+", capsys.readouterr().err)


def test_failed_run_removes_partial_outputs(tmp_path, monkeypatch):
    plan = tiny_plan(tmp_path, detectors=["ses-zf"])

    def boom(*a, **k):
        raise RuntimeError("late failure")

    monkeypatch.setattr(cli.harness, "check_ser_rows", boom)
    assert run("sweep", "--config", plan, "--out", tmp_path / "out") == 1
    assert not (tmp_path / "out").exists()
