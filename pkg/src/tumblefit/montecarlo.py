"""Randomized bodies, throws, and parameter sweeps.

The sampler draws principal-moment triples with a fixed trace and a
conditioning ratio uniform over a range, orients them uniformly on the
rotation group, and the sweep runner pushes every trial through the full
simulate / corrupt / condition / fit pipeline and scores it. Per-trial seeds
are derived from (sweep seed, grid point, trial), so trials are independent,
order-insensitive, and reproducible one at a time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .dynamics import NoiseModel, SimConfig, WheelPulse, corrupt, simulate
from .errors import DataError, TumblefitError
from .estimation import condition, fit_inertia
from .geometry import random_rotation
from .inertia import InertiaTensor
from .metrics import AccuracyReport, compare
from .signals import FilterSpec, Window

__all__ = [
    "BodySampler",
    "SweepSpec",
    "SweepResult",
    "TrialRecord",
    "PointSummary",
    "SWEEP_PARAMETERS",
    "sample_body",
    "sample_initial_spin",
    "run_trial",
    "run_sweep",
]

SWEEP_PARAMETERS = (
    "spin_magnitude",  # |omega0| in rad/s
    "min_delta_sigma",  # moment-gap band lower edge, bodies land in [v, 2v)
    "kappa",  # exact conditioning ratio
    "wheel_impulse",  # N m s delivered by the pulse
    "gyro_noise",  # (rad/s)/sqrt(Hz)
    "wheel_noise",  # (rad/s)/sqrt(Hz)
    "cutoff_hz",  # conditioning low-pass cutoff
)

FAILURE_FLAG_FRACTION = 0.10
_RESAMPLE_CAP = 1000


@dataclass
class BodySampler:
    """Draws inertia tensors with Tr = trace_target and conditioning in kappa_range.

    The moment triple is built as (1, mid, kappa) with kappa uniform over the
    range and mid uniform between the extremes; draws violating the triangle
    inequality redraw mid alone, which keeps the kappa distribution uniform.
    When `min_delta_sigma_band` is set, mid is instead constructed so the
    smallest relative moment gap lands exactly on a uniform draw from the
    band (infeasible kappa draws are rejected).
    """

    trace_target: float = 2.0e-3  # kg m^2
    kappa_range: tuple[float, float] = (1.0, 5.0)
    min_delta_sigma_band: Optional[tuple[float, float]] = None
    seed: Optional[int] = None
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        lo, hi = self.kappa_range
        if not (1.0 <= lo <= hi):
            raise ValueError("kappa_range must satisfy 1 <= lo <= hi")
        if self.trace_target <= 0.0:
            raise ValueError("trace_target must be positive")
        if self.min_delta_sigma_band is not None:
            blo, bhi = self.min_delta_sigma_band
            if not (0.0 < blo <= bhi < 1.0):
                raise ValueError("min_delta_sigma_band must lie inside (0, 1)")
        if self.rng is None:
            self.rng = np.random.default_rng(self.seed)

    def _draw_moments(self, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.kappa_range
        if self.min_delta_sigma_band is None:
            kappa = rng.uniform(lo, hi)
            mid = rng.uniform(1.0, kappa)
            for _ in range(_RESAMPLE_CAP):
                if 1.0 + mid >= kappa:
                    break
                mid = rng.uniform(1.0, kappa)
            else:
                raise DataError("could not satisfy the triangle inequality for the kappa draw")
            lam = np.array([1.0, mid, kappa])
        else:
            blo, bhi = self.min_delta_sigma_band
            for _ in range(_RESAMPLE_CAP):
                gap = rng.uniform(blo, bhi)
                kappa = rng.uniform(lo, hi)
                if (kappa - 1.0) / kappa < gap:
                    continue  # extremes already closer than the target gap
                if rng.uniform() < 0.5:
                    mid = 1.0 / (1.0 - gap)  # gap sits between the lower pair
                    if (kappa - mid) / kappa < gap:
                        continue
                else:
                    mid = kappa * (1.0 - gap)  # gap sits between the upper pair
                    if (mid - 1.0) / mid < gap:
                        continue
                if 1.0 + mid < kappa:
                    continue
                lam = np.array([1.0, mid, kappa])
                break
            else:
                raise DataError(
                    f"no body with moment gap in [{blo}, {bhi}] is reachable for "
                    f"kappa range {self.kappa_range}"
                )
        return lam * (self.trace_target / lam.sum())


def sample_body(sampler: BodySampler, rng: Optional[np.random.Generator] = None) -> InertiaTensor:
    """One random tensor: principal moments from the sampler, uniform attitude."""
    rng = sampler.rng if rng is None else rng
    lam = sampler._draw_moments(rng)
    return InertiaTensor.from_diagonal(lam).rotated(random_rotation(rng))


def sample_initial_spin(magnitude_range, rng: np.random.Generator) -> np.ndarray:
    """Direction uniform on the sphere, magnitude uniform over the range."""
    lo, hi = (float(v) for v in magnitude_range)
    if not 0.0 < lo <= hi:
        raise ValueError("magnitude range must satisfy 0 < lo <= hi")
    direction = rng.standard_normal(3)
    norm = np.linalg.norm(direction)
    while norm < 1e-12:
        direction = rng.standard_normal(3)
        norm = np.linalg.norm(direction)
    return direction / norm * rng.uniform(lo, hi)


@dataclass(frozen=True)
class SweepSpec:
    """One sensitivity study: sweep `parameter` over `grid`.

    Everything not swept stays at the base values below. Noise is the
    zero-mean experiment-density model unless overridden; recordings are pure
    free fall (no rest or hold segments), so the fit window is the whole
    series minus the filter settling margins.
    """

    parameter: str
    grid: tuple[float, ...]
    trials: int = 200
    seed: int = 0
    percentile: float = 99.0
    spin_range: tuple[float, float] = (2.0 * math.pi, 6.0 * math.pi)
    trace_target: float = 2.0e-3
    kappa_range: tuple[float, float] = (1.0, 5.0)
    noise: NoiseModel = field(default_factory=NoiseModel.white)
    pulse: WheelPulse = field(default_factory=WheelPulse)
    filter_spec: FilterSpec = field(default_factory=FilterSpec)
    sample_rate: float = 2000.0
    duration: float = 0.6

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(
                f"unknown sweep parameter {self.parameter!r}; one of {SWEEP_PARAMETERS}"
            )
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ValueError("grid must not be empty")
        if not all(np.isfinite(grid)):
            raise ValueError("grid values must be finite")
        positive = {"spin_magnitude", "min_delta_sigma", "kappa", "wheel_impulse", "cutoff_hz"}
        if self.parameter in positive and min(grid) <= 0.0:
            raise ValueError(f"{self.parameter} grid values must be positive")
        if self.parameter in ("gyro_noise", "wheel_noise") and min(grid) < 0.0:
            raise ValueError("noise grid values must be nonnegative")
        if self.parameter == "kappa" and min(grid) < 1.0:
            raise ValueError("kappa grid values must be >= 1")
        if self.parameter == "min_delta_sigma" and max(grid) >= 1.0:
            raise ValueError("min_delta_sigma grid values must be < 1")
        object.__setattr__(self, "grid", grid)
        if self.trials < 30:
            raise ValueError("need at least 30 trials per point for percentile estimates")
        if not 0.0 < self.percentile < 100.0:
            raise ValueError("percentile must be in (0, 100)")
        if self.sample_rate <= 0.0 or self.duration <= 0.0:
            raise ValueError("sample_rate and duration must be positive")


@dataclass(frozen=True)
class TrialRecord:
    point_index: int
    value: float
    trial_index: int
    body: np.ndarray  # packed true tensor
    omega0: np.ndarray
    report: Optional[AccuracyReport]
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass(frozen=True)
class PointSummary:
    value: float
    trials: int
    failures: int
    flagged: bool  # more than 10% of trials failed
    epsilon_mean: float
    epsilon_median: float
    epsilon_percentile: float
    psi_mean: float
    psi_median: float
    psi_percentile: float


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    records: tuple[TrialRecord, ...]
    summaries: tuple[PointSummary, ...]


def _point_overrides(spec: SweepSpec, value: float):
    """Spread one grid value into (sampler kwargs, spin range, noise, pulse, filter)."""
    sampler_kwargs = dict(
        trace_target=spec.trace_target, kappa_range=spec.kappa_range, min_delta_sigma_band=None
    )
    spin_range = spec.spin_range
    noise = spec.noise
    pulse = spec.pulse
    filt = spec.filter_spec
    if spec.parameter == "spin_magnitude":
        spin_range = (value, value)
    elif spec.parameter == "min_delta_sigma":
        sampler_kwargs["min_delta_sigma_band"] = (value, min(2.0 * value, 0.999))
    elif spec.parameter == "kappa":
        sampler_kwargs["kappa_range"] = (value, value)
    elif spec.parameter == "wheel_impulse":
        pulse = WheelPulse.from_impulse(
            value,
            axial_inertia=pulse.axial_inertia,
            start=pulse.start,
            ramp_up=pulse.ramp_up,
            plateau=pulse.plateau,
            ramp_down=pulse.ramp_down,
            initial_speed=pulse.initial_speed,
        )
    elif spec.parameter == "gyro_noise":
        noise = replace(noise, gyro_density=value)
    elif spec.parameter == "wheel_noise":
        noise = replace(noise, wheel_density=value)
    elif spec.parameter == "cutoff_hz":
        filt = FilterSpec(order=filt.order, cutoff_hz=value)
    return sampler_kwargs, spin_range, noise, pulse, filt


def run_trial(
    inertia: InertiaTensor,
    omega0,
    *,
    noise: NoiseModel,
    pulse: WheelPulse,
    filter_spec: FilterSpec = FilterSpec(),
    sample_rate: float = 2000.0,
    duration: float = 0.6,
) -> AccuracyReport:
    """Simulate one throw of a known body, estimate it back, and score it.

    The recording is pure free fall; the fit window is the full series and
    the wheel moment is taken as exactly known (sweeps probe the estimator,
    not the calibration).
    """
    cfg = SimConfig(
        inertia=inertia,
        omega0=omega0,
        sample_rate=sample_rate,
        duration=duration,
        wheel=pulse,
    )
    rec = corrupt(simulate(cfg).recording, noise)
    ct = condition(rec, window=Window(0, rec.n), spec=filter_spec)
    est, _, _ = fit_inertia([ct], pulse.axial_inertia)
    return compare(inertia, est)


def _run_point(spec: SweepSpec, point_index: int) -> list[TrialRecord]:
    value = spec.grid[point_index]
    sampler_kwargs, spin_range, noise, pulse, filt = _point_overrides(spec, value)
    records = []
    for trial in range(spec.trials):
        rng = np.random.default_rng([spec.seed, point_index, trial])
        sampler = BodySampler(rng=rng, **sampler_kwargs)
        body = sample_body(sampler, rng)
        omega0 = sample_initial_spin(spin_range, rng)
        trial_noise = replace(noise, seed=int(rng.integers(2**63)))
        try:
            report = run_trial(
                body,
                omega0,
                noise=trial_noise,
                pulse=pulse,
                filter_spec=filt,
                sample_rate=spec.sample_rate,
                duration=spec.duration,
            )
            err = None
        except TumblefitError as exc:
            report, err = None, type(exc).__name__
        records.append(
            TrialRecord(
                point_index=point_index,
                value=value,
                trial_index=trial,
                body=body.vector,
                omega0=omega0,
                report=report,
                error=err,
            )
        )
    return records


def _summarize(spec: SweepSpec, value: float, records: Sequence[TrialRecord]) -> PointSummary:
    eps = np.array([r.report.epsilon for r in records if r.ok])
    psi = np.array([r.report.psi for r in records if r.ok])
    failures = sum(1 for r in records if not r.ok)

    def stats(x):
        if x.size == 0:
            return math.nan, math.nan, math.nan
        return (
            float(np.mean(x)),
            float(np.median(x)),
            float(np.percentile(x, spec.percentile)),
        )

    e_mean, e_med, e_pct = stats(eps)
    p_mean, p_med, p_pct = stats(psi)
    return PointSummary(
        value=value,
        trials=len(records),
        failures=failures,
        flagged=failures > FAILURE_FLAG_FRACTION * len(records),
        epsilon_mean=e_mean,
        epsilon_median=e_med,
        epsilon_percentile=e_pct,
        psi_mean=p_mean,
        psi_median=p_med,
        psi_percentile=p_pct,
    )


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> SweepResult:
    """Run every grid point; deterministic for a given spec regardless of workers.

    Worker count comes from the argument, then the TUMBLEFIT_WORKERS
    environment variable, then 1 (serial). Failed trials are recorded with
    their error kind; a point where more than 10% fail is flagged.
    """
    if workers is None:
        workers = int(os.environ.get("TUMBLEFIT_WORKERS", "1"))
    points = range(len(spec.grid))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_point = list(pool.map(_run_point, [spec] * len(spec.grid), points))
    else:
        per_point = [_run_point(spec, i) for i in points]

    records = tuple(r for chunk in per_point for r in chunk)
    summaries = tuple(
        _summarize(spec, spec.grid[i], chunk) for i, chunk in enumerate(per_point)
    )
    return SweepResult(spec=spec, records=records, summaries=summaries)
