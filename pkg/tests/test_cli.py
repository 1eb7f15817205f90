"""Command-line behaviour: files in, files out, exit-code contract."""

import json

import numpy as np
import pytest

import synthetic
from tumblefit.cli import main
from tumblefit.formats import read_result_json, read_throw_csv, write_throw_csv

THETA = [8e-4, 1e-5, 6e-4, -2e-5, 3e-5, 6e-4]


def _write_sim_config(path, **overrides):
    doc = {
        "schema": "tumblefit.sim-config/1",
        "inertia_kg_m2": THETA,
        "omega0_rad_s": [7.0, -9.0, 12.0],
        "imu_offset_m": [-0.005, -0.012, -0.060],
        "sample_rate": 2000.0,
        "duration_s": 0.8,
        "rest_duration_s": 0.15,
        "hold_duration_s": 0.05,
        "wheel": {"impulse": 1.8e-3},
        "noise": {"preset": "none"},
    }
    doc.update(overrides)
    path.write_text(json.dumps(doc))
    return path


def _write_massless_calibration(path):
    doc = {
        "schema": "tumblefit.calibration/1",
        "m_dev_kg": 0.0,
        "x_dev_m": [0.0, 0.0, 0.0],
        "i_dev_kg_m2": [0.0] * 6,
        "i_r_zz_kg_m2": 2e-6,
        "provenance": {},
    }
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture()
def workspace(tmp_path):
    cfg = _write_sim_config(tmp_path / "sim.json")
    cal = _write_massless_calibration(tmp_path / "cal.json")
    return tmp_path, cfg, cal


def test_simulate_writes_csv_sidecar_and_truth(workspace, capsys):
    tmp, cfg, _ = workspace
    out = tmp / "throw.csv"
    assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    rec = read_throw_csv(out)
    assert rec.n == round((0.15 + 0.8 + 0.05) * 2000)
    assert rec.rest_window == (0, 300)
    truth = json.loads((tmp / "throw.truth.json").read_text())
    assert truth["inertia_kg_m2"] == THETA
    assert "wrote" in capsys.readouterr().out


def test_simulate_then_estimate_round_trip(workspace, capsys):
    tmp, cfg, cal = workspace
    out = tmp / "throw.csv"
    result = tmp / "result.json"
    assert main(["simulate", str(cfg), "-o", str(out)]) == 0
    assert main([
        "estimate", "--throw", str(out), "--calibration", str(cal),
        "--object-mass", "0.8", "-o", str(result),
    ]) == 0
    doc = read_result_json(result)
    got = np.array(doc["i_obj_kg_m2"])
    truth = np.array(THETA)
    assert np.linalg.norm(got - truth) / np.linalg.norm(truth) < 2e-3
    assert np.linalg.norm(np.array(doc["x_obj_m"]) - [0.005, 0.012, 0.060]) < 5e-5
    out_text = capsys.readouterr().out
    assert "I_obj" in out_text and "kg mm^2" in out_text


def test_estimate_accepts_manual_windows_in_seconds(workspace):
    tmp, cfg, cal = workspace
    out, result = tmp / "throw.csv", tmp / "result.json"
    main(["simulate", str(cfg), "-o", str(out)])
    code = main([
        "estimate", "--throw", str(out), "--calibration", str(cal),
        "--object-mass", "0.8", "--window", "0.2", "0.9",
        "--rest-window", "0.0", "0.14", "-o", str(result),
    ])
    assert code == 0
    doc = json.loads(result.read_text())
    a, b = doc["window"]
    assert 400 <= a < b <= 1800  # trimmed inside the requested 0.2..0.9 s


def test_cli_determinism(workspace):
    tmp, cfg, cal = workspace
    a, b = tmp / "a.csv", tmp / "b.csv"
    main(["simulate", str(cfg), "-o", str(a)])
    main(["simulate", str(cfg), "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()

    ra, rb = tmp / "ra.json", tmp / "rb.json"
    for path in (ra, rb):
        main(["estimate", "--throw", str(a), "--calibration", str(cal),
              "--object-mass", "0.8", "-o", str(path)])
    da, db = json.loads(ra.read_text()), json.loads(rb.read_text())
    da.pop("provenance"), db.pop("provenance")
    assert da == db


def test_usage_errors_exit_1(workspace, capsys):
    tmp, _, _ = workspace
    assert main([]) == 1
    assert main(["calibrate", "--proof", "x.csv"]) == 1  # missing required flags
    assert main(["estimate", "--throw", "t.csv"]) == 1
    capsys.readouterr()


def test_data_errors_exit_2(workspace, capsys):
    tmp, cfg, cal = workspace
    out = tmp / "throw.csv"
    main(["simulate", str(cfg), "-o", str(out)])
    assert main(["estimate", "--throw", str(tmp / "missing.csv"),
                 "--calibration", str(cal), "--object-mass", "0.8",
                 "-o", str(tmp / "r.json")]) == 2
    assert main(["estimate", "--throw", str(out), "--calibration", str(cal),
                 "--object-mass", "0.8", "--window", "0.2", "9.9",
                 "-o", str(tmp / "r.json")]) == 2
    err = capsys.readouterr().err
    assert "outside the recording" in err


def test_malformed_config_exits_2_and_names_the_field(tmp_path, capsys):
    bad = tmp_path / "sim.json"
    bad.write_text(json.dumps({
        "schema": "tumblefit.sim-config/1",
        "omega0_rad_s": [1, 2, 3],
    }))
    assert main(["simulate", str(bad), "-o", str(tmp_path / "t.csv")]) == 2
    assert "inertia_kg_m2" in capsys.readouterr().err


def test_numerical_errors_exit_3(workspace, capsys):
    tmp, cfg, cal = workspace
    out = tmp / "throw.csv"
    main(["simulate", str(cfg), "-o", str(out)])
    # an all-zero reference body cannot scale the wheel moment
    code = main([
        "calibrate", "--device-only", str(out), "--proof", str(out),
        "--proof-inertia", "0", "0", "0", "0", "0", "0",
        "--proof-mass", "0.34", "--device-mass", "0.1",
        "-o", str(tmp / "cal_out.json"),
    ])
    assert code == 3
    capsys.readouterr()


def test_calibrate_command_against_synthetic_truth(tmp_path, capsys):
    device_recs, proof_recs = synthetic.make_calibration_recordings()
    paths = []
    for i, rec in enumerate(device_recs + proof_recs):
        p = tmp_path / f"throw{i}.csv"
        write_throw_csv(p, rec)
        paths.append(str(p))
    proof = synthetic.proof_body()
    proof_mm2 = (proof.inertia.vector * 1e6).tolist()
    out = tmp_path / "cal.json"
    code = main([
        "calibrate", "--device-only", paths[0], paths[1], "--proof", paths[2],
        "--proof-inertia", *[f"{v:.9g}" for v in proof_mm2],
        "--proof-mass", str(proof.mass), "--device-mass", str(synthetic.DEVICE_MASS),
        "-o", str(out),
    ])
    assert code == 0
    doc = json.loads(out.read_text())
    truth = synthetic.true_calibration()
    assert doc["i_r_zz_kg_m2"] == pytest.approx(truth.i_r_zz, rel=0.005)
    scale = np.abs(truth.i_dev.vector).max()
    assert np.abs(np.array(doc["i_dev_kg_m2"]) - truth.i_dev.vector).max() < 0.011 * scale
    assert "I_R,zz" in capsys.readouterr().out


def test_sweep_command_files_and_determinism(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "schema": "tumblefit.sweep-spec/1",
        "parameter": "spin_magnitude",
        "grid": [6.2832, 18.85],
        "trials": 30,
        "seed": 11,
    }))
    assert main(["sweep", str(spec), "-o", str(tmp_path / "sw")]) == 0
    trials = tmp_path / "sw.trials.csv"
    summary = tmp_path / "sw.summary.json"
    lines = trials.read_text().strip().split("\n")
    assert len(lines) == 1 + 60
    doc = json.loads(summary.read_text())
    assert doc["schema"] == "tumblefit.sweep-summary/1"
    assert len(doc["points"]) == 2
    assert "spin_magnitude = " in capsys.readouterr().out

    assert main(["sweep", str(spec), "-o", str(tmp_path / "sw2")]) == 0
    assert trials.read_bytes() == (tmp_path / "sw2.trials.csv").read_bytes()
    d2 = json.loads((tmp_path / "sw2.summary.json").read_text())
    doc.pop("provenance"), d2.pop("provenance")
    assert doc == d2
    capsys.readouterr()


def test_version_flag():
    assert main(["--version"]) == 0
