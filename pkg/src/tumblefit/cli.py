"""Command-line interface.

Every command is a thin client over the HTTP service: files are read and
written locally, the numerics happen behind the service boundary. By default
the app runs in-process; `--server` (or TUMBLEFIT_SERVER) points the same
requests at a remote instance.

Exit codes: 0 success (including results with failed quality flags), 1 usage,
2 bad data or files, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import httpx
import numpy as np

from . import __version__
from .client import ServiceClient, ServiceError
from .dynamics import NoiseModel, ThrowRecording, WheelPulse
from .errors import DataError, NumericalError
from .inertia import InertiaTensor
from .formats import (
    CALIBRATION_SCHEMA,
    RESULT_SCHEMA,
    read_calibration_json,
    read_sim_config_json,
    read_sweep_spec_json,
    read_throw_csv,
    truth_path,
    write_sweep_rows_csv,
    write_throw_csv,
    write_truth_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the exit-code contract reserves
    # 2 for data problems, so usage maps to 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _throw_payload(rec: ThrowRecording) -> dict:
    return {
        "t": rec.t.tolist(),
        "gyro": rec.gyro.tolist(),
        "accel": rec.accel.tolist(),
        "wheel_speed": rec.wheel_speed.tolist(),
        "sample_rate": rec.sample_rate,
        "wheel_axis": rec.wheel_axis.tolist(),
        "rest_window": list(rec.rest_window) if rec.rest_window else None,
        "freefall_window": list(rec.freefall_window) if rec.freefall_window else None,
    }


def _noise_payload(noise: NoiseModel) -> dict:
    return {
        "preset": "none",
        "gyro_density": noise.gyro_density,
        "accel_density": noise.accel_density,
        "wheel_density": noise.wheel_density,
        "gyro_bias": noise.gyro_bias.tolist(),
        "accel_bias": noise.accel_bias.tolist(),
        "gyro_scale_error": noise.gyro_scale_error,
        "seed": noise.seed,
    }


def _pulse_payload(pulse: WheelPulse) -> dict:
    return {
        "axial_inertia": pulse.axial_inertia,
        "start": pulse.start,
        "ramp_up": pulse.ramp_up,
        "plateau": pulse.plateau,
        "ramp_down": pulse.ramp_down,
        "peak_accel": pulse.peak_accel,
        "initial_speed": pulse.initial_speed,
    }


def _recording_from_payload(payload: dict) -> ThrowRecording:
    return ThrowRecording(
        t=np.asarray(payload["t"], dtype=float),
        gyro=np.asarray(payload["gyro"], dtype=float),
        accel=np.asarray(payload["accel"], dtype=float),
        wheel_speed=np.asarray(payload["wheel_speed"], dtype=float),
        sample_rate=payload["sample_rate"],
        wheel_axis=np.asarray(payload["wheel_axis"], dtype=float),
        rest_window=payload.get("rest_window"),
        freefall_window=payload.get("freefall_window"),
    )


def _client(args) -> ServiceClient:
    server = args.server or os.environ.get("TUMBLEFIT_SERVER") or None
    return ServiceClient(server=server)


def _seconds_to_window(bounds, rec: ThrowRecording, name: str):
    if bounds is None:
        return None
    a, b = (int(round(v * rec.sample_rate)) for v in bounds)
    if not (0 <= a < b <= rec.n):
        raise DataError(
            f"{name} {bounds[0]:g}..{bounds[1]:g} s is outside the recording "
            f"(0..{rec.n / rec.sample_rate:g} s)"
        )
    return [a, b]


def _dump_json_doc(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------- commands --


def cmd_simulate(args) -> int:
    cfg, noise = read_sim_config_json(args.config)
    request = {
        "inertia_kg_m2": cfg.inertia.vector.tolist(),
        "omega0_rad_s": cfg.omega0.tolist(),
        "imu_offset_m": cfg.imu_offset.tolist(),
        "sample_rate": cfg.sample_rate,
        "duration_s": cfg.duration,
        "rest_duration_s": cfg.rest_duration,
        "hold_duration_s": cfg.hold_duration,
        "rest_up_axis": cfg.rest_up_axis.tolist(),
        "integrator": cfg.integrator,
        "wheel": _pulse_payload(cfg.wheel),
        "noise": _noise_payload(noise),
    }
    resp = _client(args).post("/simulate", request)
    rec = _recording_from_payload(resp["throw"])
    out = Path(args.output)
    write_throw_csv(out, rec)
    truth = resp["truth"]
    write_truth_json(
        truth_path(out),
        inertia=InertiaTensor(np.asarray(truth["inertia_kg_m2"])),
        cog=truth["cog_m"],
        omega0=truth["omega0_rad_s"],
    )
    print(f"wrote {rec.n} samples to {out} (+ sidecar, + truth)")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    request = {
        "device_throws": [_throw_payload(read_throw_csv(p)) for p in args.device_only],
        "proof_throws": [_throw_payload(read_throw_csv(p)) for p in args.proof],
        "proof_inertia_kg_m2": [v * 1e-6 for v in args.proof_inertia],
        "proof_mass_kg": args.proof_mass,
        "device_mass_kg": args.device_mass,
        "filter": {"cutoff_hz": args.cutoff},
    }
    resp = _client(args).post("/calibrate", request)
    doc = {"schema": CALIBRATION_SCHEMA, **resp}
    doc.setdefault("provenance", {})["created_utc"] = _utc_now()
    _dump_json_doc(args.output, doc)
    i_dev = np.asarray(resp["i_dev_kg_m2"]) * 1e6
    x_dev = np.asarray(resp["x_dev_m"]) * 1e3
    print(f"I_R,zz = {resp['i_r_zz_kg_m2'] * 1e6:.4f} kg mm^2")
    print(f"I_dev  = [{', '.join(f'{v:.2f}' for v in i_dev)}] kg mm^2 (theta order)")
    print(f"x_dev  = [{', '.join(f'{v:.3f}' for v in x_dev)}] mm")
    prov = resp.get("provenance", {})
    for key in ("device_torque_residual_rms", "proof_torque_residual_rms"):
        if key in prov:
            print(f"{key} = {prov[key]:.3e}")
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    rec = read_throw_csv(args.throw)
    cal = read_calibration_json(args.calibration)
    request = {
        "throw": _throw_payload(rec),
        "calibration": {
            "m_dev_kg": cal.m_dev,
            "x_dev_m": cal.x_dev.tolist(),
            "i_dev_kg_m2": cal.i_dev.vector.tolist(),
            "i_r_zz_kg_m2": cal.i_r_zz,
            "provenance": {},
        },
        "object_mass_kg": args.object_mass,
        "window": _seconds_to_window(args.window, rec, "--window"),
        "rest_window": _seconds_to_window(args.rest_window, rec, "--rest-window"),
        "filter": {"cutoff_hz": args.cutoff},
        "weighting": args.weighting,
    }
    resp = _client(args).post("/estimate", request)
    doc = {"schema": RESULT_SCHEMA, **resp, "provenance": {"created_utc": _utc_now()}}
    _dump_json_doc(args.output, doc)
    i_obj = np.asarray(resp["i_obj_kg_mm2"])
    x_obj = np.asarray(resp["x_obj_mm"])
    print(f"I_obj  = [{', '.join(f'{v:.2f}' for v in i_obj)}] kg mm^2 (theta order)")
    print(f"x_obj  = [{', '.join(f'{v:.3f}' for v in x_obj)}] mm")
    print(
        f"residuals: torque {resp['torque_residual_rms']:.3e} N m, "
        f"accel {resp['accel_residual_rms']:.3e} m/s^2, "
        f"condition {resp['condition_number']:.3e}"
    )
    if not resp["obj_positive_definite"]:
        print("warning: corrected object tensor is not positive definite", file=sys.stderr)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = read_sweep_spec_json(args.spec)
    request = {
        "parameter": spec.parameter,
        "grid": list(spec.grid),
        "trials": spec.trials,
        "seed": spec.seed,
        "percentile": spec.percentile,
        "spin_range_rad_s": list(spec.spin_range),
        "trace_target_kg_m2": spec.trace_target,
        "kappa_range": list(spec.kappa_range),
        "sample_rate": spec.sample_rate,
        "duration_s": spec.duration,
        "filter": {"cutoff_hz": spec.filter_spec.cutoff_hz, "order": spec.filter_spec.order},
        "noise": _noise_payload(spec.noise),
        "wheel": _pulse_payload(spec.pulse),
    }
    print(f"sweeping {spec.parameter} over {len(spec.grid)} points x {spec.trials} trials")
    resp = _client(args).post("/sweep", request)
    prefix = Path(args.output)
    trials_path = prefix.with_suffix(".trials.csv")
    summary_path = prefix.with_suffix(".summary.json")
    write_sweep_rows_csv(trials_path, resp["records"])
    summary = {
        "schema": "tumblefit.sweep-summary/1",
        "parameter": resp["parameter"],
        "grid": resp["grid"],
        "trials": resp["trials"],
        "seed": resp["seed"],
        "percentile": resp["percentile"],
        "points": resp["points"],
        "software_version": resp["software_version"],
        "provenance": {"created_utc": _utc_now()},
    }
    _dump_json_doc(summary_path, summary)
    for point in resp["points"]:
        eps = point["epsilon"]["median"]
        psi = point["psi"]["median"]
        flag = "  FLAGGED" if point["flagged"] else ""
        eps_s = "-" if eps is None else f"{eps:.3e}"
        psi_s = "-" if psi is None else f"{psi:.3e}"
        print(
            f"  {spec.parameter} = {point['value']:g}: eps_med {eps_s}, psi_med {psi_s}, "
            f"failures {point['failures']}/{point['trials']}{flag}"
        )
    print(f"wrote {trials_path} and {summary_path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


# ------------------------------------------------------------------ parser --


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tumblefit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tumblefit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_server(p):
        p.add_argument(
            "--server",
            default=None,
            help="service base URL (default: in-process; env TUMBLEFIT_SERVER)",
        )

    p = sub.add_parser("simulate", help="synthesise a throw recording from a config file")
    p.add_argument("config", help="simulation config JSON (tumblefit.sim-config/1)")
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    add_server(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="identify device and wheel moments from throw files")
    p.add_argument("--device-only", nargs="+", required=True, metavar="CSV",
                   help="throw recordings of the bare device")
    p.add_argument("--proof", nargs="+", required=True, metavar="CSV",
                   help="throw recordings of device + reference body")
    p.add_argument("--proof-inertia", nargs=6, type=float, required=True,
                   metavar=("IXX", "IXY", "IYY", "IXZ", "IYZ", "IZZ"),
                   help="reference-body inertia in kg mm^2, theta order")
    p.add_argument("--proof-mass", type=float, required=True, help="reference-body mass, kg")
    p.add_argument("--device-mass", type=float, required=True, help="device mass, kg")
    p.add_argument("--cutoff", type=float, default=20.0, help="low-pass cutoff, Hz")
    p.add_argument("-o", "--output", required=True, help="output calibration JSON")
    add_server(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("estimate", help="estimate object inertia and CoG from one throw")
    p.add_argument("--throw", required=True, help="throw CSV")
    p.add_argument("--calibration", required=True, help="calibration JSON")
    p.add_argument("--object-mass", type=float, required=True, help="object mass, kg")
    p.add_argument("--window", nargs=2, type=float, metavar=("START", "END"),
                   help="free-fall window in seconds (default: annotated or detected)")
    p.add_argument("--rest-window", nargs=2, type=float, metavar=("START", "END"),
                   help="rest window in seconds for bias removal")
    p.add_argument("--cutoff", type=float, default=20.0, help="low-pass cutoff, Hz")
    p.add_argument("--weighting", choices=("uniform", "spin"), default="uniform")
    p.add_argument("-o", "--output", required=True, help="output result JSON")
    add_server(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="run a Monte Carlo sensitivity sweep")
    p.add_argument("spec", help="sweep spec JSON (tumblefit.sweep-spec/1)")
    p.add_argument("-o", "--output", required=True,
                   help="output prefix; writes PREFIX.trials.csv and PREFIX.summary.json")
    add_server(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_USAGE
    try:
        return args.func(args)
    except ServiceError as exc:
        print(f"tumblefit: {exc}", file=sys.stderr)
        if exc.extra.get("null_directions"):
            print(f"  unobservable: {', '.join(exc.extra['null_directions'])}", file=sys.stderr)
        return EXIT_NUMERICAL if exc.kind == "numerical" else EXIT_DATA
    except NumericalError as exc:
        print(f"tumblefit: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"tumblefit: {exc}", file=sys.stderr)
        return EXIT_DATA
    except httpx.HTTPError as exc:
        print(f"tumblefit: service request failed: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
