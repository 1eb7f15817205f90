"""Request/response schemas for the HTTP service.

The wire format is columnar JSON: signal arrays travel as plain nested lists
with explicit units in the field names. Conversion to and from the domain
dataclasses lives here so the endpoint handlers stay one-screen small.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from ..dynamics import NoiseModel, SimConfig, ThrowRecording, WheelPulse
from ..errors import DataError
from ..estimation import DeviceCalibration, EstimationResult
from ..inertia import InertiaTensor
from ..montecarlo import SweepSpec
from ..signals import FilterSpec

Vec3 = tuple[float, float, float]
Theta = tuple[float, float, float, float, float, float]
IndexPair = tuple[int, int]


class ThrowPayload(BaseModel):
    """One recording, columnar."""

    t: list[float]
    gyro: list[Vec3]
    accel: list[Vec3]
    wheel_speed: list[float]
    sample_rate: float = Field(gt=0.0)
    wheel_axis: Vec3 = (0.0, 0.0, 1.0)
    rest_window: Optional[IndexPair] = None
    freefall_window: Optional[IndexPair] = None

    @model_validator(mode="after")
    def _consistent_lengths(self):
        n = len(self.t)
        if n == 0:
            raise ValueError("empty recording")
        for name in ("gyro", "accel", "wheel_speed"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} rows, t has {n}")
        return self

    @classmethod
    def from_recording(cls, rec: ThrowRecording) -> "ThrowPayload":
        return cls(
            t=rec.t.tolist(),
            gyro=rec.gyro.tolist(),
            accel=rec.accel.tolist(),
            wheel_speed=rec.wheel_speed.tolist(),
            sample_rate=rec.sample_rate,
            wheel_axis=tuple(rec.wheel_axis),
            rest_window=rec.rest_window,
            freefall_window=rec.freefall_window,
        )

    def to_recording(self) -> ThrowRecording:
        try:
            return ThrowRecording(
                t=np.asarray(self.t, dtype=float),
                gyro=np.asarray(self.gyro, dtype=float),
                accel=np.asarray(self.accel, dtype=float),
                wheel_speed=np.asarray(self.wheel_speed, dtype=float),
                sample_rate=self.sample_rate,
                wheel_axis=np.asarray(self.wheel_axis, dtype=float),
                rest_window=self.rest_window,
                freefall_window=self.freefall_window,
            )
        except ValueError as exc:
            raise DataError(f"throw payload: {exc}")


class NoisePayload(BaseModel):
    preset: Literal["none", "white", "experiment"] = "none"
    gyro_density: Optional[float] = Field(default=None, ge=0.0)
    accel_density: Optional[float] = Field(default=None, ge=0.0)
    wheel_density: Optional[float] = Field(default=None, ge=0.0)
    gyro_bias: Optional[Vec3] = None
    accel_bias: Optional[Vec3] = None
    gyro_scale_error: Optional[float] = None
    seed: int = 0

    def to_noise(self) -> NoiseModel:
        base = {
            "none": NoiseModel,
            "white": NoiseModel.white,
            "experiment": NoiseModel.experiment,
        }[self.preset]()
        fields = {}
        for name in (
            "gyro_density",
            "accel_density",
            "wheel_density",
            "gyro_bias",
            "accel_bias",
            "gyro_scale_error",
        ):
            value = getattr(self, name)
            if value is not None:
                fields[name] = np.asarray(value) if name.endswith("bias") else value
        return replace(base, seed=self.seed, **fields)


class WheelPayload(BaseModel):
    axial_inertia: float = 2.0e-6
    start: float = 0.05
    ramp_up: float = 0.05
    plateau: float = 0.10
    ramp_down: float = 0.05
    peak_accel: float = 6000.0
    initial_speed: float = 0.0
    impulse: Optional[float] = Field(default=None, gt=0.0)

    def to_pulse(self) -> WheelPulse:
        timings = dict(
            axial_inertia=self.axial_inertia,
            start=self.start,
            ramp_up=self.ramp_up,
            plateau=self.plateau,
            ramp_down=self.ramp_down,
            initial_speed=self.initial_speed,
        )
        try:
            if self.impulse is not None:
                return WheelPulse.from_impulse(self.impulse, **timings)
            return WheelPulse(peak_accel=self.peak_accel, **timings)
        except ValueError as exc:
            raise DataError(f"wheel payload: {exc}")


class FilterPayload(BaseModel):
    cutoff_hz: float = Field(default=20.0, gt=0.0)
    order: int = Field(default=4, ge=1)

    def to_spec(self) -> FilterSpec:
        return FilterSpec(order=self.order, cutoff_hz=self.cutoff_hz)


class CalibrationPayload(BaseModel):
    m_dev_kg: float = Field(ge=0.0)
    x_dev_m: Vec3
    i_dev_kg_m2: Theta
    i_r_zz_kg_m2: float = Field(gt=0.0)
    provenance: dict = Field(default_factory=dict)

    @classmethod
    def from_calibration(cls, cal: DeviceCalibration) -> "CalibrationPayload":
        return cls(
            m_dev_kg=cal.m_dev,
            x_dev_m=tuple(cal.x_dev),
            i_dev_kg_m2=tuple(cal.i_dev.vector),
            i_r_zz_kg_m2=cal.i_r_zz,
            provenance=cal.provenance,
        )

    def to_calibration(self) -> DeviceCalibration:
        try:
            return DeviceCalibration(
                m_dev=self.m_dev_kg,
                x_dev=np.asarray(self.x_dev_m),
                i_dev=InertiaTensor(np.asarray(self.i_dev_kg_m2)),
                i_r_zz=self.i_r_zz_kg_m2,
                provenance=self.provenance,
            )
        except ValueError as exc:
            raise DataError(f"calibration payload: {exc}")


class TruthPayload(BaseModel):
    inertia_kg_m2: Theta
    cog_m: Vec3
    omega0_rad_s: Vec3


class SimulateRequest(BaseModel):
    inertia_kg_m2: Theta
    omega0_rad_s: Vec3
    imu_offset_m: Vec3 = (0.0, 0.0, 0.0)
    sample_rate: float = Field(default=4000.0, gt=0.0)
    duration_s: float = Field(default=1.0, gt=0.0)
    rest_duration_s: float = Field(default=0.0, ge=0.0)
    hold_duration_s: float = Field(default=0.0, ge=0.0)
    rest_up_axis: Vec3 = (0.0, 0.0, 1.0)
    integrator: Literal["rk4", "euler"] = "rk4"
    wheel: WheelPayload = Field(default_factory=WheelPayload)
    noise: NoisePayload = Field(default_factory=NoisePayload)

    def to_config(self) -> SimConfig:
        try:
            return SimConfig(
                inertia=InertiaTensor(np.asarray(self.inertia_kg_m2)),
                omega0=np.asarray(self.omega0_rad_s),
                imu_offset=np.asarray(self.imu_offset_m),
                sample_rate=self.sample_rate,
                duration=self.duration_s,
                rest_duration=self.rest_duration_s,
                hold_duration=self.hold_duration_s,
                rest_up_axis=np.asarray(self.rest_up_axis),
                integrator=self.integrator,
                wheel=self.wheel.to_pulse(),
            )
        except ValueError as exc:
            raise DataError(f"simulation config: {exc}")


class SimulateResponse(BaseModel):
    throw: ThrowPayload
    truth: TruthPayload


class EstimateRequest(BaseModel):
    throw: ThrowPayload
    calibration: CalibrationPayload
    object_mass_kg: float = Field(gt=0.0)
    window: Optional[IndexPair] = None
    rest_window: Optional[IndexPair] = None
    filter: FilterPayload = Field(default_factory=FilterPayload)
    weighting: Literal["uniform", "spin"] = "uniform"


class EstimateResponse(BaseModel):
    i_obj_kg_m2: Theta
    i_obj_kg_mm2: Theta
    i_comb_kg_m2: Theta
    i_comb_kg_mm2: Theta
    x_obj_m: Vec3
    x_obj_mm: Vec3
    x_comb_m: Vec3
    x_comb_mm: Vec3
    m_obj_kg: float
    torque_residual_rms: float
    accel_residual_rms: float
    condition_number: float
    window: IndexPair
    comb_positive_definite: bool
    obj_positive_definite: bool
    software_version: str

    @classmethod
    def from_result(cls, result: EstimationResult, version: str) -> "EstimateResponse":
        theta_obj = result.i_obj.vector
        theta_comb = result.i_comb.vector
        return cls(
            i_obj_kg_m2=tuple(theta_obj),
            i_obj_kg_mm2=tuple(theta_obj * 1e6),
            i_comb_kg_m2=tuple(theta_comb),
            i_comb_kg_mm2=tuple(theta_comb * 1e6),
            x_obj_m=tuple(result.x_obj),
            x_obj_mm=tuple(result.x_obj * 1e3),
            x_comb_m=tuple(result.x_comb),
            x_comb_mm=tuple(result.x_comb * 1e3),
            m_obj_kg=result.m_obj,
            torque_residual_rms=result.torque_residual_rms,
            accel_residual_rms=result.accel_residual_rms,
            condition_number=result.condition_number,
            window=(result.window.start, result.window.end),
            comb_positive_definite=result.comb_positive_definite,
            obj_positive_definite=result.obj_positive_definite,
            software_version=version,
        )


class CalibrateRequest(BaseModel):
    device_throws: list[ThrowPayload] = Field(min_length=1)
    proof_throws: list[ThrowPayload] = Field(min_length=1)
    proof_inertia_kg_m2: Theta
    proof_mass_kg: float
    device_mass_kg: float
    filter: FilterPayload = Field(default_factory=FilterPayload)


class SweepRequest(BaseModel):
    parameter: str
    grid: list[float] = Field(min_length=1)
    trials: int = 200
    seed: int = 0
    percentile: float = 99.0
    spin_range_rad_s: tuple[float, float] = (2.0 * np.pi, 6.0 * np.pi)
    trace_target_kg_m2: float = 2.0e-3
    kappa_range: tuple[float, float] = (1.0, 5.0)
    sample_rate: float = 2000.0
    duration_s: float = 0.6
    filter: FilterPayload = Field(default_factory=FilterPayload)
    noise: NoisePayload = Field(default_factory=lambda: NoisePayload(preset="white"))
    wheel: WheelPayload = Field(default_factory=WheelPayload)

    def to_spec(self) -> SweepSpec:
        try:
            return SweepSpec(
                parameter=self.parameter,
                grid=tuple(self.grid),
                trials=self.trials,
                seed=self.seed,
                percentile=self.percentile,
                spin_range=self.spin_range_rad_s,
                trace_target=self.trace_target_kg_m2,
                kappa_range=self.kappa_range,
                noise=self.noise.to_noise(),
                pulse=self.wheel.to_pulse(),
                filter_spec=self.filter.to_spec(),
                sample_rate=self.sample_rate,
                duration=self.duration_s,
            )
        except ValueError as exc:
            raise DataError(f"sweep spec: {exc}")


class SweepStats(BaseModel):
    mean: Optional[float]
    median: Optional[float]
    percentile: Optional[float]


class SweepPointPayload(BaseModel):
    value: float
    trials: int
    failures: int
    flagged: bool
    epsilon: SweepStats
    psi: SweepStats


class TrialRowPayload(BaseModel):
    point_index: int
    value: float
    trial_index: int
    ok: bool
    error: Optional[str]
    epsilon: Optional[float]
    psi: Optional[float]
    min_delta_sigma: Optional[float]
    kappa: Optional[float]
    axes_degenerate: Optional[bool]
    body: Theta
    omega0: Vec3


class SweepResponse(BaseModel):
    parameter: str
    grid: list[float]
    trials: int
    seed: int
    percentile: float
    points: list[SweepPointPayload]
    records: list[TrialRowPayload]
    software_version: str


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str
