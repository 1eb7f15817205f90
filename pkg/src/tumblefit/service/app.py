"""FastAPI application exposing the pipeline.

Stateless compute only: every endpoint takes a self-contained JSON request
and returns the full result; no files, no sessions. Domain failures map to
structured error bodies so clients can distinguish bad input (400) from
numerical breakdown (422) without parsing prose.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..dynamics import corrupt, simulate
from ..errors import DataError, NumericalError, RankDeficiencyError
from ..estimation import calibrate, estimate_throw
from ..formats import point_summary_to_dict, trial_row
from ..inertia import InertiaTensor
from ..montecarlo import run_sweep
from ..signals import Window
from .models import (
    CalibrateRequest,
    CalibrationPayload,
    EstimateRequest,
    EstimateResponse,
    HealthResponse,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    ThrowPayload,
    TruthPayload,
)


def _error_body(kind: str, exc: Exception) -> dict:
    detail = {"kind": kind, "message": str(exc)}
    if isinstance(exc, RankDeficiencyError) and exc.null_directions:
        detail["null_directions"] = exc.null_directions
    return {"detail": detail}


def create_app() -> FastAPI:
    app = FastAPI(title="tumblefit", version=__version__)

    @app.exception_handler(DataError)
    async def data_error(request: Request, exc: DataError):
        return JSONResponse(status_code=400, content=_error_body("data", exc))

    @app.exception_handler(NumericalError)
    async def numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(status_code=422, content=_error_body("numerical", exc))

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def do_simulate(req: SimulateRequest):
        cfg = req.to_config()
        rec = corrupt(simulate(cfg).recording, req.noise.to_noise())
        return SimulateResponse(
            throw=ThrowPayload.from_recording(rec),
            truth=TruthPayload(
                inertia_kg_m2=tuple(cfg.inertia.vector),
                cog_m=tuple(-cfg.imu_offset),
                omega0_rad_s=tuple(cfg.omega0),
            ),
        )

    @app.post("/estimate", response_model=EstimateResponse)
    def do_estimate(req: EstimateRequest):
        result = estimate_throw(
            req.throw.to_recording(),
            req.calibration.to_calibration(),
            req.object_mass_kg,
            window=Window(*req.window) if req.window else None,
            rest_window=Window(*req.rest_window) if req.rest_window else None,
            spec=req.filter.to_spec(),
            weighting=req.weighting,
        )
        return EstimateResponse.from_result(result, __version__)

    @app.post("/calibrate", response_model=CalibrationPayload)
    def do_calibrate(req: CalibrateRequest):
        cal = calibrate(
            [p.to_recording() for p in req.device_throws],
            [p.to_recording() for p in req.proof_throws],
            InertiaTensor(np.asarray(req.proof_inertia_kg_m2)),
            req.proof_mass_kg,
            req.device_mass_kg,
            spec=req.filter.to_spec(),
        )
        return CalibrationPayload.from_calibration(cal)

    @app.post("/sweep", response_model=SweepResponse)
    def do_sweep(req: SweepRequest):
        result = run_sweep(req.to_spec())
        return SweepResponse(
            parameter=result.spec.parameter,
            grid=list(result.spec.grid),
            trials=result.spec.trials,
            seed=result.spec.seed,
            percentile=result.spec.percentile,
            points=[point_summary_to_dict(s) for s in result.summaries],
            records=[trial_row(r) for r in result.records],
            software_version=__version__,
        )

    return app
