"""Identification core.

Builds the parameter-linear regressor for the packed inertia vector, solves
it batch or recursively, fits the combined centre of gravity from
accelerometer data, subtracts the measurement device, and calibrates the
device itself from throws with and without a reference body of known
properties.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .dynamics import ThrowRecording
from .errors import (
    DataError,
    DegenerateProofError,
    NumericalError,
    RankDeficiencyError,
    WindowError,
)
from .geometry import as_unit_vec3, as_vec3
from .inertia import InertiaTensor, parallel_axis
from .signals import (
    MIN_WINDOW_SAMPLES,
    FilterSpec,
    Window,
    differentiate,
    filtfilt,
    remove_bias,
    select_window,
)

__all__ = [
    "RegressorRow",
    "DeviceCalibration",
    "EstimationResult",
    "ConditionedThrow",
    "build_regressor",
    "regressor_stack",
    "fit_inertia",
    "solve_batch",
    "solve_recursive",
    "RecursiveSolver",
    "estimate_cog",
    "correct_for_device",
    "condition",
    "estimate_throw",
    "calibrate",
]

COMPONENT_NAMES = ("Ixx", "Ixy", "Iyy", "Ixz", "Iyz", "Izz")
AXIS_NAMES = ("x", "y", "z")

# relative singular-value cutoff below which the stack counts as rank deficient
RANK_TOL = 1e-10

# reference body must shift the unitless combined inertia by at least this
# fraction before the calibration scale projection is trusted
PROOF_SHIFT_MIN = 0.05

Z_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class RegressorRow:
    """One sample of the linear system: coeff (3x6) @ theta = rhs (N m)."""

    coeff: np.ndarray
    rhs: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.coeff, dtype=float)
        r = np.asarray(self.rhs, dtype=float)
        if c.shape != (3, 6) or r.shape != (3,):
            raise ValueError("coeff must be (3, 6) and rhs (3,)")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
            raise ValueError("regressor entries must be finite")
        if self.weight < 0.0:
            raise ValueError("weight must be nonnegative")
        object.__setattr__(self, "coeff", c)
        object.__setattr__(self, "rhs", r)


@dataclass(frozen=True)
class DeviceCalibration:
    """Measurement-device properties in the IMU frame.

    `i_dev` is about the device CoG, including the wheel at standstill;
    `i_r_zz` is the wheel's axial moment used to scale reaction torques.
    `m_dev` may be zero only for the degenerate no-device correction.
    """

    m_dev: float
    x_dev: np.ndarray
    i_dev: InertiaTensor
    i_r_zz: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x_dev", as_vec3(self.x_dev, "x_dev"))
        if self.m_dev < 0.0:
            raise ValueError("m_dev must be nonnegative")
        if self.i_r_zz <= 0.0:
            raise ValueError("i_r_zz must be positive")
        if self.m_dev > 0.0 and not self.i_dev.is_positive_definite(-1e-18):
            raise ValueError("i_dev must be positive definite for a physical device")


@dataclass(frozen=True)
class EstimationResult:
    """Combined-body fit plus the device-corrected object properties."""

    i_comb: InertiaTensor
    x_comb: np.ndarray
    i_obj: InertiaTensor
    x_obj: np.ndarray
    m_obj: float
    torque_residual_rms: float  # N m
    accel_residual_rms: float  # m/s^2
    condition_number: float  # of the normal equations, after column scaling
    window: Window
    comb_positive_definite: bool
    obj_positive_definite: bool


class CogFit(NamedTuple):
    x_comb: np.ndarray
    residual_rms: float


class DeviceCorrection(NamedTuple):
    i_obj: InertiaTensor
    x_obj: np.ndarray
    positive_definite: bool


# -- regressor -----------------------------------------------------------


def build_regressor(
    omega, omega_dot, wheel_speed: float, wheel_accel: float, i_r_zz: float
) -> RegressorRow:
    """One sample of the torque balance, wheel on the body z axis.

    The coefficient matrix satisfies coeff @ pack(I) = I @ omega_dot +
    omega x (I @ omega) for every symmetric I; the right-hand side is the
    wheel reaction torque -i_r_zz * (wheel_accel * z + omega x (wheel_speed * z)).
    """
    coeff, rhs = regressor_stack(
        np.asarray(omega, dtype=float).reshape(1, 3),
        np.asarray(omega_dot, dtype=float).reshape(1, 3),
        np.array([wheel_speed], dtype=float),
        np.array([wheel_accel], dtype=float),
        i_r_zz,
    )
    return RegressorRow(coeff=coeff, rhs=rhs)


def regressor_stack(
    omega: np.ndarray,
    omega_dot: np.ndarray,
    wheel_speed: np.ndarray,
    wheel_accel: np.ndarray,
    i_r_zz: float,
    axis=Z_AXIS,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized regressor for N samples: returns coeff (3N, 6), rhs (3N,)."""
    w = np.asarray(omega, dtype=float)
    g = np.asarray(omega_dot, dtype=float)
    n = as_unit_vec3(axis, "wheel axis")
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    gx, gy, gz = g[:, 0], g[:, 1], g[:, 2]

    m = w.shape[0]
    coeff = np.empty((m, 3, 6))
    # theta order: Ixx, Ixy, Iyy, Ixz, Iyz, Izz
    coeff[:, 0, 0] = gx
    coeff[:, 0, 1] = gy - wx * wz
    coeff[:, 0, 2] = -wy * wz
    coeff[:, 0, 3] = gz + wx * wy
    coeff[:, 0, 4] = wy * wy - wz * wz
    coeff[:, 0, 5] = wy * wz
    coeff[:, 1, 0] = wx * wz
    coeff[:, 1, 1] = gx + wy * wz
    coeff[:, 1, 2] = gy
    coeff[:, 1, 3] = wz * wz - wx * wx
    coeff[:, 1, 4] = gz - wx * wy
    coeff[:, 1, 5] = -wx * wz
    coeff[:, 2, 0] = -wx * wy
    coeff[:, 2, 1] = wx * wx - wy * wy
    coeff[:, 2, 2] = wx * wy
    coeff[:, 2, 3] = gx - wy * wz
    coeff[:, 2, 4] = gy + wx * wz
    coeff[:, 2, 5] = gz

    torque = -i_r_zz * (
        np.asarray(wheel_accel, dtype=float)[:, None] * n
        + np.cross(w, np.asarray(wheel_speed, dtype=float)[:, None] * n)
    )
    return coeff.reshape(3 * m, 6), torque.reshape(3 * m)


# -- least squares -------------------------------------------------------


def _scaled_svd_solve(A: np.ndarray, b: np.ndarray, names: Sequence[str]):
    """Column-scaled SVD least squares with rank diagnostics.

    Returns (x, residual_rms, normal_condition). Raises RankDeficiencyError
    naming the parameter combinations spanned by the null space.
    """
    scale = np.linalg.norm(A, axis=0)
    scale[scale == 0.0] = 1.0
    As = A / scale
    U, S, Vt = np.linalg.svd(As, full_matrices=False)
    if S[0] == 0.0 or S[-1] < RANK_TOL * S[0]:
        null = Vt[S < RANK_TOL * max(S[0], 1e-300)]
        labels = []
        for v in null:
            idx = np.flatnonzero(np.abs(v) > 0.3 * np.abs(v).max())
            labels.extend(names[i] for i in idx)
        seen = sorted(set(labels), key=list(names).index)
        raise RankDeficiencyError(
            "least-squares stack is rank deficient; unobservable direction(s): "
            + ", ".join(seen),
            null_directions=list(seen),
        )
    x = (Vt.T @ ((U.T @ b) / S)) / scale
    resid = A @ x - b
    rms = float(np.sqrt(np.mean(resid**2)))
    cond = float((S[0] / S[-1]) ** 2)
    return x, rms, cond


def _stack_rows(rows: Sequence[RegressorRow]) -> tuple[np.ndarray, np.ndarray]:
    coeff = np.vstack([r.coeff * np.sqrt(r.weight) for r in rows])
    rhs = np.concatenate([r.rhs * np.sqrt(r.weight) for r in rows])
    return coeff, rhs


def solve_batch(rows: Sequence[RegressorRow]) -> tuple[np.ndarray, float, float]:
    """Least squares over all rows: (theta, residual RMS, condition number)."""
    rows = list(rows)
    if len(rows) < 2:
        raise DataError("need at least 2 samples; one sample cannot pin 6 parameters")
    A, b = _stack_rows(rows)
    return _scaled_svd_solve(A, b, COMPONENT_NAMES)


class RecursiveSolver:
    """Recursive least squares over regressor rows.

    With forgetting = 1 and a large initial covariance the final state
    matches the batch solution; forgetting < 1 discounts old samples.
    """

    def __init__(self, forgetting: float = 1.0, covariance_scale: float = 1e8):
        if not 0.0 < forgetting <= 1.0:
            raise ValueError("forgetting factor must be in (0, 1]")
        if covariance_scale <= 0.0:
            raise ValueError("initial covariance scale must be positive")
        self.forgetting = forgetting
        self.theta = np.zeros(6)
        self.P = covariance_scale * np.eye(6)

    def update(self, row: RegressorRow) -> np.ndarray:
        lam = self.forgetting
        Z = row.coeff * np.sqrt(row.weight)
        y = row.rhs * np.sqrt(row.weight)
        PZt = self.P @ Z.T
        gain = PZt @ np.linalg.inv(lam * np.eye(3) + Z @ PZt)
        self.theta = self.theta + gain @ (y - Z @ self.theta)
        self.P = (self.P - gain @ Z @ self.P) / lam
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.theta))):
            raise NumericalError("recursive solver covariance blew up (non-finite state)")
        return self.theta.copy()


def solve_recursive(
    rows: Iterable[RegressorRow],
    forgetting: float = 1.0,
    covariance_scale: float = 1e8,
) -> np.ndarray:
    """Run the recursive solver over a row stream; returns the theta trace (K, 6)."""
    solver = RecursiveSolver(forgetting=forgetting, covariance_scale=covariance_scale)
    trace = [solver.update(row) for row in rows]
    if not trace:
        raise DataError("empty row stream")
    return np.vstack(trace)


# -- centre of gravity ---------------------------------------------------


def estimate_cog(omega: np.ndarray, omega_dot: np.ndarray, accel: np.ndarray) -> CogFit:
    """Fit the IMU position relative to the barycentre from specific force.

    In free fall accel_i = [omega_dot_i]x rho + [omega_i]x [omega_i]x rho;
    the returned position is x_comb = -rho, the combined CoG in the IMU frame.
    """
    w = np.asarray(omega, dtype=float)
    g = np.asarray(omega_dot, dtype=float)
    a = np.asarray(accel, dtype=float)
    n = w.shape[0]
    if n < 2:
        raise DataError("need at least 2 samples for the CoG fit")
    speed = np.linalg.norm(w, axis=1)
    if np.mean(speed > 2.0) < 0.5:
        raise DataError(
            "insufficient spin for the CoG fit: |omega| must exceed 2 rad/s "
            "for at least half the window"
        )

    # A_i = [g]x + [w]x[w]x = [g]x + w w^T - |w|^2 I
    A = np.zeros((n, 3, 3))
    A[:, 0, 1] = -g[:, 2]
    A[:, 0, 2] = g[:, 1]
    A[:, 1, 0] = g[:, 2]
    A[:, 1, 2] = -g[:, 0]
    A[:, 2, 0] = -g[:, 1]
    A[:, 2, 1] = g[:, 0]
    A += w[:, :, None] * w[:, None, :]
    A -= (speed**2)[:, None, None] * np.eye(3)

    rho, rms, _ = _scaled_svd_solve(A.reshape(3 * n, 3), a.reshape(3 * n), AXIS_NAMES)
    return CogFit(x_comb=-rho, residual_rms=rms)


# -- device correction and calibration ------------------------------------


def correct_for_device(
    i_comb: InertiaTensor, x_comb, cal: DeviceCalibration, m_obj: float
) -> DeviceCorrection:
    """Strip the device from the combined fit via the parallel axis theorem."""
    if m_obj <= 0.0:
        raise DataError("object mass must be positive")
    x_comb = as_vec3(x_comb, "x_comb")
    r = (cal.x_dev - x_comb) * cal.m_dev / m_obj
    s = x_comb - cal.x_dev
    x_obj = x_comb - r
    i_obj = i_comb - parallel_axis(m_obj, r) - cal.i_dev - parallel_axis(cal.m_dev, s)
    return DeviceCorrection(
        i_obj=i_obj, x_obj=x_obj, positive_definite=i_obj.is_positive_definite()
    )


@dataclass(frozen=True)
class ConditionedThrow:
    """Filtered, differentiated, and windowed signals ready for the solvers."""

    omega: np.ndarray
    omega_dot: np.ndarray
    accel: np.ndarray
    wheel_speed: np.ndarray
    wheel_accel: np.ndarray
    wheel_axis: np.ndarray
    sample_rate: float
    window: Window

    @property
    def n(self) -> int:
        return self.omega.shape[0]


def condition(
    rec: ThrowRecording,
    window: Optional[Window] = None,
    rest_window: Optional[Window] = None,
    spec: FilterSpec = FilterSpec(),
    edge_margin: Optional[int] = None,
) -> ConditionedThrow:
    """Bias-correct, low-pass, differentiate, and slice one recording.

    Window precedence: explicit argument, then the recording's own free-fall
    annotation, then the pulse-seeded heuristic. Filtering is confined to the
    window slice so that throw and catch transients just outside it can never
    smear into the data; the price is a reflective-padding artifact at the
    slice edges, which is removed by trimming `edge_margin` samples per side
    (one filter settling time by default). The reported window is the
    trimmed one actually fitted on.
    """
    rest = rest_window
    if rest is None and rec.rest_window is not None:
        rest = Window(*rec.rest_window)
    if rest is not None:
        rec = remove_bias(rec, rest, spec)

    if window is None and rec.freefall_window is not None:
        window = Window(*rec.freefall_window).check_against(rec.n)
    win = select_window(rec, manual=window, spec=spec)

    margin = spec.transient_samples(rec.sample_rate) if edge_margin is None else edge_margin
    if len(win) - 2 * margin < MIN_WINDOW_SAMPLES:
        raise WindowError(
            f"window [{win.start}, {win.end}) leaves fewer than "
            f"{MIN_WINDOW_SAMPLES} samples after trimming {margin} "
            "filter-settling samples per side"
        )

    sl = win.slice
    gyro_f = filtfilt(rec.gyro[sl], rec.sample_rate, spec)
    accel_f = filtfilt(rec.accel[sl], rec.sample_rate, spec)
    wheel_f = filtfilt(rec.wheel_speed[sl], rec.sample_rate, spec)
    gyro_dot = differentiate(gyro_f, rec.sample_rate)
    wheel_dot = differentiate(wheel_f, rec.sample_rate)

    keep = slice(margin, len(win) - margin)
    return ConditionedThrow(
        omega=gyro_f[keep],
        omega_dot=gyro_dot[keep],
        accel=accel_f[keep],
        wheel_speed=wheel_f[keep],
        wheel_accel=wheel_dot[keep],
        wheel_axis=rec.wheel_axis,
        sample_rate=rec.sample_rate,
        window=Window(win.start + margin, win.end - margin),
    )


def _inertia_rows(ct: ConditionedThrow, i_r_zz: float, weighting: str):
    A, b = regressor_stack(
        ct.omega, ct.omega_dot, ct.wheel_speed, ct.wheel_accel, i_r_zz, axis=ct.wheel_axis
    )
    if weighting == "spin":
        w = np.repeat(np.linalg.norm(ct.omega, axis=1), 3)
        A = A * np.sqrt(w)[:, None]
        b = b * np.sqrt(w)
    elif weighting != "uniform":
        raise ValueError(f"unknown weighting {weighting!r}")
    return A, b


def fit_inertia(
    throws: Sequence[ConditionedThrow], i_r_zz: float, weighting: str = "uniform"
) -> tuple[InertiaTensor, float, float]:
    """Inertia-only fit over one or more conditioned throws.

    Rows from all throws are stacked into a single system before solving.
    Returns (tensor, torque residual RMS, condition number).
    """
    throws = list(throws)
    if not throws:
        raise DataError("need at least one conditioned throw")
    blocks = [_inertia_rows(ct, i_r_zz, weighting) for ct in throws]
    A = np.vstack([blk[0] for blk in blocks])
    b = np.concatenate([blk[1] for blk in blocks])
    theta, torque_rms, cond = _scaled_svd_solve(A, b, COMPONENT_NAMES)
    return InertiaTensor.from_vector(theta), torque_rms, cond


def _solve_throws(
    throws: Sequence[ConditionedThrow], i_r_zz: float, weighting: str = "uniform"
):
    """Stack inertia and CoG systems across throws and solve both."""
    tensor, torque_rms, cond = fit_inertia(throws, i_r_zz, weighting)
    w_all = np.vstack([ct.omega for ct in throws])
    g_all = np.vstack([ct.omega_dot for ct in throws])
    a_all = np.vstack([ct.accel for ct in throws])
    cog = estimate_cog(w_all, g_all, a_all)
    return tensor, cog, torque_rms, cond


def estimate_throw(
    rec: ThrowRecording,
    cal: DeviceCalibration,
    m_obj: float,
    window: Optional[Window] = None,
    rest_window: Optional[Window] = None,
    spec: FilterSpec = FilterSpec(),
    weighting: str = "uniform",
) -> EstimationResult:
    """Full single-throw pipeline: condition, fit, strip the device."""
    if m_obj <= 0.0:
        raise DataError("object mass must be positive")
    ct = condition(rec, window=window, rest_window=rest_window, spec=spec)
    i_comb, cog, torque_rms, cond = _solve_throws([ct], cal.i_r_zz, weighting)
    corr = correct_for_device(i_comb, cog.x_comb, cal, m_obj)
    return EstimationResult(
        i_comb=i_comb,
        x_comb=cog.x_comb,
        i_obj=corr.i_obj,
        x_obj=corr.x_obj,
        m_obj=m_obj,
        torque_residual_rms=torque_rms,
        accel_residual_rms=cog.residual_rms,
        condition_number=cond,
        window=ct.window,
        comb_positive_definite=i_comb.is_positive_definite(),
        obj_positive_definite=corr.positive_definite,
    )


def calibrate(
    device_throws: Sequence[ThrowRecording],
    proof_throws: Sequence[ThrowRecording],
    proof_inertia: InertiaTensor,
    proof_mass: float,
    device_mass: float,
    spec: FilterSpec = FilterSpec(),
) -> DeviceCalibration:
    """Identify the device and the wheel's axial moment from two throw sets.

    Both configurations are solved with a unit wheel moment, which scales the
    fitted tensors by the unknown 1/i_r_zz. Adding the reference body changes
    the combined tensor by a known amount, so projecting that known change
    onto the measured (unitless) change recovers the scale; the device tensor
    follows from the device-only fit.
    """
    if proof_mass <= 0.0 or np.abs(proof_inertia.vector).max() == 0.0:
        raise DegenerateProofError(
            "reference body must have positive mass and a nonzero inertia tensor"
        )
    if device_mass <= 0.0:
        raise DataError("device mass must be positive")
    if not device_throws or not proof_throws:
        raise DataError("need at least one throw per configuration")

    dev_ct = [condition(r, spec=spec) for r in device_throws]
    prf_ct = [condition(r, spec=spec) for r in proof_throws]

    i1, cog1, dev_rms, dev_cond = _solve_throws(dev_ct, 1.0)
    i2, cog2, prf_rms, prf_cond = _solve_throws(prf_ct, 1.0)
    x_dev = cog1.x_comb

    r = (x_dev - cog2.x_comb) * device_mass / proof_mass
    s = cog2.x_comb - x_dev
    lhs = (i2 - i1).vector
    rhs = (proof_inertia + parallel_axis(proof_mass, r) + parallel_axis(device_mass, s)).vector

    shift = np.linalg.norm(lhs)
    if shift < PROOF_SHIFT_MIN * np.linalg.norm(i1.vector):
        raise DegenerateProofError(
            "reference body changed the combined inertia by less than "
            f"{PROOF_SHIFT_MIN:.0%}; cannot resolve the wheel moment scale"
        )
    i_r_zz = float(lhs @ rhs) / float(lhs @ lhs)
    if i_r_zz <= 0.0:
        raise NumericalError(
            f"wheel moment projection came out nonpositive ({i_r_zz:.3e}); "
            "check reference-body data"
        )
    i_dev = i_r_zz * i1
    if not i_dev.is_positive_definite():
        raise NumericalError("calibrated device inertia is not positive definite")

    return DeviceCalibration(
        m_dev=device_mass,
        x_dev=x_dev,
        i_dev=i_dev,
        i_r_zz=i_r_zz,
        provenance={
            "device_throws": len(device_throws),
            "proof_throws": len(proof_throws),
            "device_torque_residual_rms": dev_rms,
            "proof_torque_residual_rms": prf_rms,
            "device_cog_residual_rms": cog1.residual_rms,
            "proof_cog_residual_rms": cog2.residual_rms,
            "device_condition_number": dev_cond,
            "proof_condition_number": prf_cond,
        },
    )
