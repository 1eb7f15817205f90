"""File formats: throw CSV with JSON sidecars, calibration/result/sweep JSON.

Plain CSV and JSON throughout; recordings are small enough that a binary
format buys nothing and text keeps external plotting trivial. All floats are
written with 17 significant digits so write -> read round trips are lossless
for float64. Every JSON document carries a `schema` field; timestamps only
ever appear inside `provenance` blocks so the data payload stays bit-stable
under fixed seeds.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import NoiseModel, SimConfig, ThrowRecording, WheelPulse
from .errors import FormatError
from .estimation import DeviceCalibration, EstimationResult
from .inertia import InertiaTensor
from .montecarlo import SweepResult, SweepSpec
from .signals import FilterSpec

__all__ = [
    "THROW_HEADER",
    "meta_path",
    "truth_path",
    "write_throw_csv",
    "read_throw_csv",
    "write_truth_json",
    "read_truth_json",
    "write_calibration_json",
    "read_calibration_json",
    "result_to_dict",
    "write_result_json",
    "read_result_json",
    "trial_row",
    "write_sweep_csv",
    "write_sweep_rows_csv",
    "point_summary_to_dict",
    "sweep_summary_to_dict",
    "write_sweep_summary_json",
    "read_sim_config_json",
    "read_sweep_spec_json",
]

THROW_HEADER = "t,gx,gy,gz,ax,ay,az,wr"
FLOAT_FMT = "%.17g"

THROW_META_SCHEMA = "tumblefit.throw-meta/1"
TRUTH_SCHEMA = "tumblefit.truth/1"
CALIBRATION_SCHEMA = "tumblefit.calibration/1"
RESULT_SCHEMA = "tumblefit.result/1"
SWEEP_SUMMARY_SCHEMA = "tumblefit.sweep-summary/1"
SIM_CONFIG_SCHEMA = "tumblefit.sim-config/1"
SWEEP_SPEC_SCHEMA = "tumblefit.sweep-spec/1"

DT_JITTER_MAX = 1e-9  # seconds


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def meta_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".meta.json")


def truth_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".truth.json")


# --------------------------------------------------------- parse helpers --


def _load_json(path, expect_schema: str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found")
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    schema = doc.get("schema")
    if schema != expect_schema:
        raise FormatError(f"{path}: schema {schema!r}, expected {expect_schema!r}")
    return doc


def _field(doc: dict, key: str, where: str):
    if key not in doc:
        raise FormatError(f"{where}: missing field '{key}'")
    return doc[key]


def _float_field(doc: dict, key: str, where: str, default=None) -> float:
    if key not in doc:
        if default is not None:
            return float(default)
        raise FormatError(f"{where}: missing field '{key}'")
    v = doc[key]
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise FormatError(f"{where}: field '{key}' must be a finite number, got {v!r}")
    return float(v)


def _vector_field(doc: dict, key: str, n: int, where: str, default=None) -> np.ndarray:
    if key not in doc:
        if default is not None:
            return np.asarray(default, dtype=float)
        raise FormatError(f"{where}: missing field '{key}'")
    v = doc[key]
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: field '{key}' must be a list of {n} numbers")
    if arr.shape != (n,) or not np.all(np.isfinite(arr)):
        raise FormatError(f"{where}: field '{key}' must be {n} finite numbers, got {v!r}")
    return arr


def _window_field(doc: dict, key: str, where: str) -> Optional[tuple[int, int]]:
    v = doc.get(key)
    if v is None:
        return None
    try:
        a, b = int(v[0]), int(v[1])
    except (TypeError, ValueError, IndexError):
        raise FormatError(f"{where}: field '{key}' must be a [start, end] sample pair")
    return (a, b)


def _jsonable(value):
    """Recursively coerce numpy scalars/arrays so json.dump accepts the tree."""
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _dump_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2) + "\n")


# ------------------------------------------------------------- throw CSV --


def write_throw_csv(path, rec: ThrowRecording) -> None:
    """Write the recording and its .meta.json sidecar next to it."""
    path = Path(path)
    data = np.column_stack([rec.t, rec.gyro, rec.accel, rec.wheel_speed])
    with path.open("w") as f:
        np.savetxt(f, data, fmt=FLOAT_FMT, delimiter=",", header=THROW_HEADER, comments="")
    meta = {
        "schema": THROW_META_SCHEMA,
        "sample_rate": rec.sample_rate,
        "wheel_axis": rec.wheel_axis,
        "rest_window": list(rec.rest_window) if rec.rest_window else None,
        "freefall_window": list(rec.freefall_window) if rec.freefall_window else None,
    }
    _dump_json(meta_path(path), meta)


def read_throw_csv(path) -> ThrowRecording:
    """Read a throw CSV (and its sidecar when present) back into a recording.

    Without a sidecar the sample rate is inferred from the time column and
    the wheel axis defaults to +z.
    """
    path = Path(path)
    try:
        with path.open() as f:
            header = f.readline().strip()
            if header != THROW_HEADER:
                raise FormatError(f"{path}: header {header!r}, expected {THROW_HEADER!r}")
            try:
                with warnings.catch_warnings():
                    # emptiness is checked below with a proper diagnostic
                    warnings.simplefilter("ignore", UserWarning)
                    data = np.loadtxt(f, delimiter=",", ndmin=2)
            except ValueError as exc:
                raise FormatError(f"{path}: {exc}")
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found")
    if data.size == 0:
        raise FormatError(f"{path}: no samples")
    if data.shape[1] != 8:
        raise FormatError(f"{path}: expected 8 columns, got {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: non-finite values")
    t = data[:, 0]
    if t.size < 2:
        raise FormatError(f"{path}: need at least 2 samples")
    dt = np.diff(t)
    if np.any(dt <= 0.0):
        raise FormatError(f"{path}: time column must be strictly increasing")
    step = float(np.median(dt))
    if np.max(np.abs(dt - step)) > DT_JITTER_MAX:
        raise FormatError(f"{path}: sample interval varies by more than {DT_JITTER_MAX} s")

    sample_rate = 1.0 / step
    wheel_axis = np.array([0.0, 0.0, 1.0])
    rest = fall = None
    mp = meta_path(path)
    if mp.exists():
        meta = _load_json(mp, THROW_META_SCHEMA)
        sample_rate = _float_field(meta, "sample_rate", str(mp))
        if abs(sample_rate * step - 1.0) > 1e-6:
            raise FormatError(
                f"{mp}: sample_rate {sample_rate} disagrees with the time column ({1.0 / step:.6g})"
            )
        wheel_axis = _vector_field(meta, "wheel_axis", 3, str(mp), default=wheel_axis)
        rest = _window_field(meta, "rest_window", str(mp))
        fall = _window_field(meta, "freefall_window", str(mp))
    try:
        return ThrowRecording(
            t=t,
            gyro=data[:, 1:4],
            accel=data[:, 4:7],
            wheel_speed=data[:, 7],
            sample_rate=sample_rate,
            wheel_axis=wheel_axis,
            rest_window=rest,
            freefall_window=fall,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}")


def write_truth_json(path, inertia: InertiaTensor, cog, omega0) -> None:
    """Ground-truth companion for synthetic throws (combined body, IMU frame)."""
    _dump_json(
        path,
        {
            "schema": TRUTH_SCHEMA,
            "inertia_kg_m2": inertia.vector,
            "cog_m": np.asarray(cog, dtype=float),
            "omega0_rad_s": np.asarray(omega0, dtype=float),
        },
    )


def read_truth_json(path) -> dict:
    doc = _load_json(path, TRUTH_SCHEMA)
    where = str(path)
    return {
        "inertia": InertiaTensor(_vector_field(doc, "inertia_kg_m2", 6, where)),
        "cog": _vector_field(doc, "cog_m", 3, where),
        "omega0": _vector_field(doc, "omega0_rad_s", 3, where),
    }


# ------------------------------------------------------- calibration JSON --


def write_calibration_json(path, cal: DeviceCalibration) -> None:
    _dump_json(
        path,
        {
            "schema": CALIBRATION_SCHEMA,
            "m_dev_kg": cal.m_dev,
            "x_dev_m": cal.x_dev,
            "i_dev_kg_m2": cal.i_dev.vector,
            "i_r_zz_kg_m2": cal.i_r_zz,
            "provenance": dict(cal.provenance),
        },
    )


def read_calibration_json(path) -> DeviceCalibration:
    doc = _load_json(path, CALIBRATION_SCHEMA)
    where = str(path)
    try:
        return DeviceCalibration(
            m_dev=_float_field(doc, "m_dev_kg", where),
            x_dev=_vector_field(doc, "x_dev_m", 3, where),
            i_dev=InertiaTensor(_vector_field(doc, "i_dev_kg_m2", 6, where)),
            i_r_zz=_float_field(doc, "i_r_zz_kg_m2", where),
            provenance=doc.get("provenance", {}),
        )
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}")


# ------------------------------------------------------------ result JSON --


def result_to_dict(result: EstimationResult, software_version: str) -> dict:
    """Serializable view of an estimate; mm blocks are exact 1e6/1e3 rescalings."""
    theta = result.i_obj.vector
    theta_comb = result.i_comb.vector
    return {
        "schema": RESULT_SCHEMA,
        "i_obj_kg_m2": theta,
        "i_obj_kg_mm2": theta * 1e6,
        "i_comb_kg_m2": theta_comb,
        "i_comb_kg_mm2": theta_comb * 1e6,
        "x_obj_m": result.x_obj,
        "x_obj_mm": result.x_obj * 1e3,
        "x_comb_m": result.x_comb,
        "x_comb_mm": result.x_comb * 1e3,
        "m_obj_kg": result.m_obj,
        "torque_residual_rms": result.torque_residual_rms,
        "accel_residual_rms": result.accel_residual_rms,
        "condition_number": result.condition_number,
        "window": [result.window.start, result.window.end],
        "comb_positive_definite": result.comb_positive_definite,
        "obj_positive_definite": result.obj_positive_definite,
        "software_version": software_version,
    }


def write_result_json(path, result: EstimationResult, software_version: str) -> None:
    doc = result_to_dict(result, software_version)
    doc["provenance"] = {"created_utc": _utc_now()}
    _dump_json(path, doc)


def read_result_json(path) -> dict:
    """Parse a result document, checking the unit blocks agree exactly."""
    doc = _load_json(path, RESULT_SCHEMA)
    where = str(path)
    for si, scaled, factor in (
        ("i_obj_kg_m2", "i_obj_kg_mm2", 1e6),
        ("i_comb_kg_m2", "i_comb_kg_mm2", 1e6),
        ("x_obj_m", "x_obj_mm", 1e3),
        ("x_comb_m", "x_comb_mm", 1e3),
    ):
        n = 6 if si.startswith("i_") else 3
        a = _vector_field(doc, si, n, where)
        b = _vector_field(doc, scaled, n, where)
        if not np.array_equal(a * factor, b):
            raise FormatError(f"{where}: '{scaled}' is not exactly {factor:g} x '{si}'")
    return doc


# ----------------------------------------------------------- sweep output --


SWEEP_CSV_HEADER = (
    "point_index,value,trial_index,ok,error,epsilon,psi,min_delta_sigma,kappa,"
    "axes_degenerate,Ixx,Ixy,Iyy,Ixz,Iyz,Izz,w0x,w0y,w0z"
)


def trial_row(record) -> dict:
    """Flat dict view of one trial; failed trials keep the draw, metrics are None."""
    rep = record.report
    return {
        "point_index": record.point_index,
        "value": record.value,
        "trial_index": record.trial_index,
        "ok": record.ok,
        "error": record.error,
        "epsilon": rep.epsilon if rep else None,
        "psi": rep.psi if rep else None,
        "min_delta_sigma": rep.min_delta_sigma if rep else None,
        "kappa": rep.kappa if rep else None,
        "axes_degenerate": rep.axes_degenerate if rep else None,
        "body": [float(v) for v in record.body],
        "omega0": [float(v) for v in record.omega0],
    }


def write_sweep_rows_csv(path, rows) -> None:
    """Write trial-row dicts (see `trial_row`) as CSV, one line per trial."""

    def num(v):
        return "" if v is None else FLOAT_FMT % v

    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        cells = (
            [str(r["point_index"]), FLOAT_FMT % r["value"], str(r["trial_index"])]
            + [str(int(r["ok"])), r["error"] or ""]
            + [num(r[k]) for k in ("epsilon", "psi", "min_delta_sigma", "kappa")]
            + ["" if r["axes_degenerate"] is None else str(int(r["axes_degenerate"]))]
            + [FLOAT_FMT % v for v in r["body"]]
            + [FLOAT_FMT % v for v in r["omega0"]]
        )
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(path, result: SweepResult) -> None:
    write_sweep_rows_csv(path, (trial_row(r) for r in result.records))


def _none_if_nan(value: float):
    return None if math.isnan(value) else value


def point_summary_to_dict(s) -> dict:
    """JSON-safe view of a PointSummary; all-failed points carry null stats."""
    return {
        "value": s.value,
        "trials": s.trials,
        "failures": s.failures,
        "flagged": s.flagged,
        "epsilon": {
            "mean": _none_if_nan(s.epsilon_mean),
            "median": _none_if_nan(s.epsilon_median),
            "percentile": _none_if_nan(s.epsilon_percentile),
        },
        "psi": {
            "mean": _none_if_nan(s.psi_mean),
            "median": _none_if_nan(s.psi_median),
            "percentile": _none_if_nan(s.psi_percentile),
        },
    }


def sweep_summary_to_dict(result: SweepResult, software_version: str) -> dict:
    spec = result.spec
    return {
        "schema": SWEEP_SUMMARY_SCHEMA,
        "parameter": spec.parameter,
        "grid": list(spec.grid),
        "trials": spec.trials,
        "seed": spec.seed,
        "percentile": spec.percentile,
        "points": [point_summary_to_dict(s) for s in result.summaries],
        "software_version": software_version,
    }


def write_sweep_summary_json(path, result: SweepResult, software_version: str) -> None:
    doc = sweep_summary_to_dict(result, software_version)
    doc["provenance"] = {"created_utc": _utc_now()}
    _dump_json(path, doc)


# ----------------------------------------------------------- config files --


def _noise_from_dict(doc: dict, where: str) -> NoiseModel:
    presets = {"none": NoiseModel, "white": NoiseModel.white, "experiment": NoiseModel.experiment}
    name = doc.get("preset", "none")
    if name not in presets:
        raise FormatError(f"{where}: noise preset {name!r}, expected one of {sorted(presets)}")
    base = presets[name]()
    kwargs = {}
    for key in ("gyro_density", "accel_density", "wheel_density", "gyro_scale_error"):
        if key in doc:
            kwargs[key] = _float_field(doc, key, where)
    for key in ("gyro_bias", "accel_bias"):
        if key in doc:
            kwargs[key] = _vector_field(doc, key, 3, where)
    if "seed" in doc:
        kwargs["seed"] = int(_float_field(doc, "seed", where))
    try:
        return replace(base, **kwargs)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: noise block: {exc}")


def _pulse_from_dict(doc: dict, where: str) -> WheelPulse:
    kwargs = {}
    for key in ("axial_inertia", "start", "ramp_up", "plateau", "ramp_down",
                "peak_accel", "initial_speed"):
        if key in doc:
            kwargs[key] = _float_field(doc, key, where)
    impulse = doc.get("impulse")
    try:
        if impulse is not None:
            kwargs.pop("peak_accel", None)
            return WheelPulse.from_impulse(_float_field(doc, "impulse", where), **kwargs)
        return WheelPulse(**kwargs)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: wheel block: {exc}")


def read_sim_config_json(path) -> tuple[SimConfig, NoiseModel]:
    doc = _load_json(path, SIM_CONFIG_SCHEMA)
    where = str(path)
    theta = _vector_field(doc, "inertia_kg_m2", 6, where)
    try:
        inertia = InertiaTensor(theta)
        cfg = SimConfig(
            inertia=inertia,
            omega0=_vector_field(doc, "omega0_rad_s", 3, where),
            imu_offset=_vector_field(doc, "imu_offset_m", 3, where, default=(0.0, 0.0, 0.0)),
            sample_rate=_float_field(doc, "sample_rate", where, default=4000.0),
            duration=_float_field(doc, "duration_s", where, default=1.0),
            rest_duration=_float_field(doc, "rest_duration_s", where, default=0.0),
            hold_duration=_float_field(doc, "hold_duration_s", where, default=0.0),
            rest_up_axis=_vector_field(doc, "rest_up_axis", 3, where, default=(0.0, 0.0, 1.0)),
            integrator=doc.get("integrator", "rk4"),
            wheel=_pulse_from_dict(doc.get("wheel", {}), where),
        )
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}")
    noise = _noise_from_dict(doc.get("noise", {}), where)
    return cfg, noise


def read_sweep_spec_json(path) -> SweepSpec:
    doc = _load_json(path, SWEEP_SPEC_SCHEMA)
    where = str(path)
    parameter = _field(doc, "parameter", where)
    raw_grid = _field(doc, "grid", where)
    if not isinstance(raw_grid, list) or not raw_grid:
        raise FormatError(f"{where}: field 'grid' must be a non-empty list of numbers")
    grid = _vector_field(doc, "grid", len(raw_grid), where)
    kwargs = {}
    if "trials" in doc:
        kwargs["trials"] = int(_float_field(doc, "trials", where))
    if "seed" in doc:
        kwargs["seed"] = int(_float_field(doc, "seed", where))
    if "percentile" in doc:
        kwargs["percentile"] = _float_field(doc, "percentile", where)
    if "spin_range_rad_s" in doc:
        kwargs["spin_range"] = tuple(_vector_field(doc, "spin_range_rad_s", 2, where))
    if "trace_target_kg_m2" in doc:
        kwargs["trace_target"] = _float_field(doc, "trace_target_kg_m2", where)
    if "kappa_range" in doc:
        kwargs["kappa_range"] = tuple(_vector_field(doc, "kappa_range", 2, where))
    if "sample_rate" in doc:
        kwargs["sample_rate"] = _float_field(doc, "sample_rate", where)
    if "duration_s" in doc:
        kwargs["duration"] = _float_field(doc, "duration_s", where)
    if "cutoff_hz" in doc:
        kwargs["filter_spec"] = FilterSpec(cutoff_hz=_float_field(doc, "cutoff_hz", where))
    if "noise" in doc:
        kwargs["noise"] = _noise_from_dict(doc["noise"], where)
    if "wheel" in doc:
        kwargs["pulse"] = _pulse_from_dict(doc["wheel"], where)
    try:
        return SweepSpec(parameter=parameter, grid=tuple(grid), **kwargs)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}")
