"""Offline conditioning of throw recordings.

Zero-phase low-pass filtering (forward-backward Butterworth), numerical
differentiation, rest-window bias removal, and free-fall window selection.
All transforms are pure series-in/series-out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.signal

from .dynamics import GRAVITY, ThrowRecording
from .errors import DataError, RestWindowError, WindowError

__all__ = [
    "FilterSpec",
    "Window",
    "filtfilt",
    "differentiate",
    "remove_bias",
    "select_window",
]

MIN_WINDOW_SAMPLES = 50
REST_GYRO_STD_MAX = 0.02  # rad/s per axis


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth low-pass run forward then backward (per-pass order)."""

    order: int = 4
    cutoff_hz: float = 20.0

    def __post_init__(self):
        if self.order < 2 or self.order % 2:
            raise ValueError("order must be an even integer >= 2")
        if self.cutoff_hz <= 0.0:
            raise ValueError("cutoff must be positive")

    def time_constant(self, sample_rate: float) -> float:
        """Slowest filter pole time constant, in samples."""
        tau = 1.0 / (2.0 * math.pi * self.cutoff_hz * math.sin(math.pi / (2 * self.order)))
        return tau * sample_rate

    def transient_samples(self, sample_rate: float) -> int:
        """Settling span of the slowest pole (three time constants), in samples."""
        return int(math.ceil(3.0 * self.time_constant(sample_rate)))


@dataclass(frozen=True)
class Window:
    """Half-open [start, end) sample range into a recording."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"window [{self.start}, {self.end}) is empty or negative")

    def __len__(self) -> int:
        return self.end - self.start

    @property
    def slice(self) -> slice:
        return slice(self.start, self.end)

    def check_against(self, n: int, min_samples: int = MIN_WINDOW_SAMPLES) -> "Window":
        if self.end > n:
            raise WindowError(f"window [{self.start}, {self.end}) exceeds {n} samples")
        if len(self) < min_samples:
            raise WindowError(f"window has {len(self)} samples, need >= {min_samples}")
        return self


def filtfilt(signal, sample_rate: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Zero-phase low-pass along axis 0 with reflective edge padding.

    Padding runs 24 pole time constants (capped by the series itself) so edge
    transients sit below 1e-9 of signal scale; the series must span at least
    three filter settling times to leave room for that.
    """
    x = np.asarray(signal, dtype=float)
    if not 0.0 < spec.cutoff_hz < sample_rate / 2.0:
        raise DataError(
            f"cutoff {spec.cutoff_hz} Hz must sit below the Nyquist rate {sample_rate / 2.0} Hz"
        )
    if x.shape[0] <= 3 * spec.transient_samples(sample_rate):
        raise DataError(
            f"series of {x.shape[0]} samples is too short to filter at "
            f"{spec.cutoff_hz} Hz (needs > {3 * spec.transient_samples(sample_rate)})"
        )
    pad = min(x.shape[0] - 1, int(math.ceil(24.0 * spec.time_constant(sample_rate))))
    sos = scipy.signal.butter(spec.order, spec.cutoff_hz, btype="low", fs=sample_rate, output="sos")
    return scipy.signal.sosfiltfilt(sos, x, axis=0, padtype="even", padlen=pad)


def differentiate(signal, sample_rate: float) -> np.ndarray:
    """Central differences along axis 0, one-sided (second order) at the edges."""
    x = np.asarray(signal, dtype=float)
    if x.shape[0] < 3:
        raise DataError("need at least 3 samples to differentiate")
    return np.gradient(x, 1.0 / sample_rate, axis=0, edge_order=2)


def remove_bias(
    rec: ThrowRecording, rest: Window, spec: FilterSpec = FilterSpec()
) -> ThrowRecording:
    """Subtract rest-window sensor offsets from the whole recording.

    The gyro offset is the plain rest mean. The accelerometer at rest reads
    bias plus gravity reaction, so only the component on top of a 1 g vector
    along the detected up axis is removed.
    """
    rest.check_against(rec.n, min_samples=2)
    sl = rest.slice

    # stillness means no motion, not no sensor noise: judge the low-passed
    # rates, skipping the filter bleed from whatever follows the window; the
    # throw onset smears backwards, so the tail needs twice the clearance
    trans = spec.transient_samples(rec.sample_rate)
    if rec.n > 3 * trans and len(rest) > 3 * trans + 16:
        motion = filtfilt(rec.gyro, rec.sample_rate, spec)[rest.start + trans : rest.end - 2 * trans]
    else:
        motion = rec.gyro[sl]
    gyro_std = motion.std(axis=0)
    if np.any(gyro_std > REST_GYRO_STD_MAX):
        raise RestWindowError(
            f"rest window gyro std {gyro_std} rad/s exceeds {REST_GYRO_STD_MAX}; "
            "the device is not at rest there"
        )

    accel_mean = rec.accel[sl].mean(axis=0)
    g_mag = float(np.linalg.norm(accel_mean))
    if g_mag < 1.0:
        raise RestWindowError(
            f"rest window mean specific force is {g_mag:.3f} m/s^2; expected about 1 g"
        )
    up = accel_mean / g_mag
    return replace(
        rec,
        gyro=rec.gyro - rec.gyro[sl].mean(axis=0),
        accel=rec.accel - (accel_mean - GRAVITY * up),
    )


def select_window(
    rec: ThrowRecording,
    manual: Window | None = None,
    spec: FilterSpec = FilterSpec(),
) -> Window:
    """Pick the free-fall span to estimate over.

    A manual window is validated and echoed back. Otherwise the wheel pulse
    is located where |d(wheel)/dt| exceeds 10% of its global peak, and the
    window grows outward from the pulse until the low-passed accelerometer
    norm crosses 3 m/s^2 above the in-pulse median (hand contact or rest).
    """
    if manual is not None:
        return manual.check_against(rec.n)

    wheel = filtfilt(rec.wheel_speed, rec.sample_rate, spec)
    rate = np.abs(differentiate(wheel, rec.sample_rate))
    peak = float(rate.max())
    floor = float(np.median(rate))
    if peak <= 0.0 or peak < 8.0 * floor + 1e-12:
        raise WindowError("no wheel pulse found in the recording")
    active = np.flatnonzero(rate > 0.1 * peak)
    lo, hi = int(active[0]), int(active[-1]) + 1

    accel_norm = np.linalg.norm(filtfilt(rec.accel, rec.sample_rate, spec), axis=1)
    threshold = 3.0 + float(np.median(accel_norm[lo:hi]))

    start = lo
    while start > 0 and accel_norm[start - 1] <= threshold:
        start -= 1
    end = hi
    while end < rec.n and accel_norm[end] <= threshold:
        end += 1

    window = Window(start, end)
    if len(window) < MIN_WINDOW_SAMPLES:
        raise WindowError(
            f"detected free-fall window has only {len(window)} samples; "
            "supply the window explicitly"
        )
    return window
