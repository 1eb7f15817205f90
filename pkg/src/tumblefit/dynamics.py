"""Free-fall spin simulator for a rigid body carrying a reaction wheel.

During free fall the only torque on the combined body is the internal wheel
reaction, so the body rates obey

    I dw/dt + w x (I w) = -J * (dwr/dt * n + w x (wr * n))

with I the combined inertia about the barycentre, J the wheel's axial moment,
wr the wheel speed relative to the body, and n the wheel axis (body z by
convention). The simulator integrates these rates plus the attitude
quaternion, then synthesises what the IMU would record: body rates, specific
force at the IMU position, and the wheel tachometer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import IntegrationError
from .geometry import as_unit_vec3, as_vec3, rotate_vectors
from .inertia import InertiaTensor

__all__ = [
    "GRAVITY",
    "WheelPulse",
    "SimConfig",
    "ThrowRecording",
    "NoiseModel",
    "SimOutput",
    "simulate",
    "corrupt",
    "angular_acceleration",
]

GRAVITY = 9.80665  # m/s^2


@dataclass(frozen=True)
class WheelPulse:
    """Trapezoidal wheel angular-acceleration profile.

    The wheel accelerates linearly for `ramp_up` seconds, holds `peak_accel`
    for `plateau` seconds, and ramps back to zero over `ramp_down`. Times are
    measured from the start of free fall. The wheel keeps its final speed
    afterwards, which leaves a steady gyroscopic torque on the body.
    """

    axial_inertia: float = 2.0e-6  # kg m^2 about the spin axis
    start: float = 0.05  # s into free fall
    ramp_up: float = 0.05
    plateau: float = 0.10
    ramp_down: float = 0.05
    peak_accel: float = 6000.0  # rad/s^2
    initial_speed: float = 0.0  # rad/s relative to the body

    def __post_init__(self):
        if self.axial_inertia <= 0.0:
            raise ValueError("axial_inertia must be positive")
        for name in ("start", "ramp_up", "plateau", "ramp_down"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def effective_time(self) -> float:
        """Integral of the unit-height trapezoid."""
        return 0.5 * self.ramp_up + self.plateau + 0.5 * self.ramp_down

    @property
    def impulse(self) -> float:
        """Net angular impulse J * (speed change), N m s."""
        return self.axial_inertia * self.peak_accel * self.effective_time

    @classmethod
    def from_impulse(cls, impulse: float, **kwargs) -> "WheelPulse":
        """Scale `peak_accel` so the pulse delivers the requested impulse."""
        probe = cls(peak_accel=1.0, **kwargs)
        if probe.effective_time <= 0.0:
            raise ValueError("pulse must have nonzero duration")
        peak = impulse / (probe.axial_inertia * probe.effective_time)
        return cls(peak_accel=peak, **kwargs)

    def accel_at(self, tau):
        """Wheel angular acceleration at `tau` seconds after free-fall start."""
        tau = np.asarray(tau, dtype=float)
        u = tau - self.start
        ru, pl, rd = self.ramp_up, self.plateau, self.ramp_down
        out = np.zeros_like(u)
        if ru > 0.0:
            m = (u >= 0.0) & (u < ru)
            out[m] = self.peak_accel * u[m] / ru
        m = (u >= ru) & (u < ru + pl)
        out[m] = self.peak_accel
        if rd > 0.0:
            v = u - ru - pl
            m = (v >= 0.0) & (v < rd)
            out[m] = self.peak_accel * (1.0 - v[m] / rd)
        return out if out.ndim else float(out)

    def speed_at(self, tau):
        """Wheel speed relative to the body, integrating the trapezoid."""
        tau = np.asarray(tau, dtype=float)
        u = np.clip(tau - self.start, 0.0, None)
        ru, pl, rd = self.ramp_up, self.plateau, self.ramp_down
        a = self.peak_accel
        out = np.full_like(u, self.initial_speed)
        if ru > 0.0:
            m = u < ru
            out[m] += 0.5 * a * u[m] ** 2 / ru
        gain_up = 0.5 * a * ru
        m = (u >= ru) & (u < ru + pl)
        out[m] += gain_up + a * (u[m] - ru)
        gain_pl = gain_up + a * pl
        if rd > 0.0:
            v = u - ru - pl
            m = (v >= 0.0) & (v < rd)
            out[m] += gain_pl + a * (v[m] - 0.5 * v[m] ** 2 / rd)
        m = u >= ru + pl + rd
        out[m] += gain_pl + 0.5 * a * rd
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class SimConfig:
    """One synthetic throw.

    `inertia` is the combined body (object + device + wheel) about its
    barycentre; `imu_offset` points from the barycentre to the IMU, expressed
    in body axes. The recording may include a resting prefix and a held
    suffix around the free-fall span so bias removal and window detection
    have something to bite on.
    """

    inertia: InertiaTensor
    omega0: np.ndarray
    imu_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    sample_rate: float = 4000.0
    duration: float = 1.0
    rest_duration: float = 0.0
    hold_duration: float = 0.0
    rest_up_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    integrator: str = "rk4"
    wheel: WheelPulse = field(default_factory=WheelPulse)

    def __post_init__(self):
        object.__setattr__(self, "omega0", as_vec3(self.omega0, "omega0"))
        object.__setattr__(self, "imu_offset", as_vec3(self.imu_offset, "imu_offset"))
        object.__setattr__(self, "rest_up_axis", as_unit_vec3(self.rest_up_axis, "rest_up_axis"))
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be positive")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.rest_duration < 0.0 or self.hold_duration < 0.0:
            raise ValueError("rest/hold durations must be nonnegative")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.inertia.is_positive_definite():
            raise ValueError("inertia must be positive definite")


@dataclass(frozen=True)
class ThrowRecording:
    """IMU + wheel time series for one throw.

    Columns: body rates (rad/s), specific force at the IMU (m/s^2), wheel
    speed relative to the body (rad/s). Windows are [start, end) sample
    index pairs.
    """

    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    wheel_speed: np.ndarray
    sample_rate: float
    wheel_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    rest_window: Optional[tuple[int, int]] = None
    freefall_window: Optional[tuple[int, int]] = None

    def __post_init__(self):
        n = self.t.shape[0]
        if self.gyro.shape != (n, 3) or self.accel.shape != (n, 3):
            raise ValueError("gyro/accel must be (N, 3) matching t")
        if self.wheel_speed.shape != (n,):
            raise ValueError("wheel_speed must be (N,) matching t")
        if self.sample_rate <= 0.0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "wheel_axis", as_unit_vec3(self.wheel_axis, "wheel_axis"))
        for name in ("rest_window", "freefall_window"):
            w = getattr(self, name)
            if w is not None:
                a, b = int(w[0]), int(w[1])
                if not (0 <= a < b <= n):
                    raise ValueError(f"{name} {w} out of bounds for {n} samples")
                object.__setattr__(self, name, (a, b))

    @property
    def n(self) -> int:
        return self.t.shape[0]

    @property
    def has_rest_prefix(self) -> bool:
        return self.rest_window is not None


@dataclass(frozen=True)
class NoiseModel:
    """Sensor corruption applied to an ideal recording.

    Densities are white-noise amplitude spectral densities; the per-sample
    standard deviation at rate fs is density * sqrt(fs / 2). Biases are
    constant offsets; the gyro additionally sees a common fractional scale
    error. Everything is reproducible from `seed`.
    """

    gyro_density: float = 0.0  # (rad/s)/sqrt(Hz)
    accel_density: float = 0.0  # (m/s^2)/sqrt(Hz)
    wheel_density: float = 0.0  # (rad/s)/sqrt(Hz)
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_scale_error: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gyro_bias", as_vec3(self.gyro_bias, "gyro_bias"))
        object.__setattr__(self, "accel_bias", as_vec3(self.accel_bias, "accel_bias"))
        for name in ("gyro_density", "accel_density", "wheel_density"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")

    @staticmethod
    def sample_sigma(density: float, sample_rate: float) -> float:
        return density * math.sqrt(sample_rate / 2.0)

    @classmethod
    def experiment(cls, seed: int = 0) -> "NoiseModel":
        """Bench-grade consumer IMU levels: noise, datasheet-scale biases, 0.5% gyro scale."""
        return cls(
            gyro_density=0.75e-3,
            accel_density=7.0e-4,
            wheel_density=0.05,
            gyro_bias=np.array([9.0e-3, -9.0e-3, 4.5e-3]),
            accel_bias=np.array([0.12, -0.196, 0.07]),
            gyro_scale_error=0.005,
            seed=seed,
        )

    @classmethod
    def white(cls, seed: int = 0) -> "NoiseModel":
        """Zero-mean sensor noise at the experiment densities, no biases."""
        return cls(
            gyro_density=0.75e-3,
            accel_density=7.0e-4,
            wheel_density=0.05,
            seed=seed,
        )


@dataclass(frozen=True)
class SimOutput:
    """Recording plus the simulation-only ground truth alongside it."""

    recording: ThrowRecording
    quat: np.ndarray  # (N, 4) body-to-inertial attitude
    omega_dot: np.ndarray  # (N, 3) true body angular acceleration
    config: SimConfig

    def angular_momentum_inertial(self) -> np.ndarray:
        """Total angular momentum in the inertial frame, (N, 3)."""
        rec = self.recording
        body = rec.gyro @ self.config.inertia.matrix.T
        body = body + self.config.wheel.axial_inertia * rec.wheel_speed[:, None] * rec.wheel_axis
        return rotate_vectors(self.quat, body)

    def rotational_energy(self) -> np.ndarray:
        """Kinetic energy of body plus wheel rotation, (N,)."""
        rec = self.recording
        I = self.config.inertia.matrix
        j = self.config.wheel.axial_inertia
        w_axis = rec.gyro @ rec.wheel_axis
        e_body = 0.5 * np.einsum("ij,jk,ik->i", rec.gyro, I, rec.gyro)
        return e_body + j * w_axis * rec.wheel_speed + 0.5 * j * rec.wheel_speed**2

    def conservation_drift(self) -> tuple[float, float]:
        """(momentum, energy) worst relative drift per second over the free fall."""
        i0, i1 = self.recording.freefall_window
        span = (i1 - 1 - i0) / self.recording.sample_rate
        L = self.angular_momentum_inertial()[i0:i1]
        lmag = np.linalg.norm(L, axis=1)
        l_drift = np.abs(lmag - lmag[0]).max() / max(lmag[0], 1e-300) / span
        E = self.rotational_energy()[i0:i1]
        e_drift = np.abs(E - E[0]).max() / max(abs(E[0]), 1e-300) / span
        return float(l_drift), float(e_drift)


def angular_acceleration(
    inertia: InertiaTensor,
    omega,
    wheel_speed: float,
    wheel_accel: float,
    axial_inertia: float,
    axis=(0.0, 0.0, 1.0),
) -> np.ndarray:
    """Body angular acceleration from the free-fall equation of motion."""
    w = as_vec3(omega, "omega")
    n = as_unit_vec3(axis, "axis")
    torque = -axial_inertia * (wheel_accel * n + np.cross(w, wheel_speed * n))
    return np.linalg.solve(inertia.matrix, torque - np.cross(w, inertia.apply(w)))


def _integrate_freefall(cfg: SimConfig, n_steps: int, t_offset: float):
    """Fixed-step integration of body rates + attitude over the free fall.

    Returns per-sample omega (n+1, 3), omega_dot (n+1, 3), quat (n+1, 4).
    The hot loop runs on plain floats; the wheel profile is pre-evaluated on
    the half-step grid so RK4 stages never call back into numpy.
    """
    dt = 1.0 / cfg.sample_rate
    half = 0.5 * dt
    rk4 = cfg.integrator == "rk4"

    I = cfg.inertia.matrix
    ixx, ixy, ixz, _, iyy, iyz, _, _, izz = (float(v) for v in I.ravel())
    Jm = np.linalg.inv(I)
    j00, j01, j02, j10, j11, j12, j20, j21, j22 = (float(v) for v in Jm.ravel())
    jw = float(cfg.wheel.axial_inertia)

    # wheel speed/accel on the half-step grid covering stage times
    tau = np.arange(2 * n_steps + 1) * half
    wr_grid = cfg.wheel.speed_at(tau).tolist()
    wrdot_grid = cfg.wheel.accel_at(tau).tolist()

    wx, wy, wz = (float(v) for v in cfg.omega0)
    qw, qx, qy, qz = 1.0, 0.0, 0.0, 0.0

    omega_rows = []
    omega_dot_rows = []
    quat_rows = []
    isfinite = math.isfinite

    def rhs(ax, ay, az, wr, wrdot):
        # angular momentum and gyroscopic term
        lx = ixx * ax + ixy * ay + ixz * az
        ly = ixy * ax + iyy * ay + iyz * az
        lz = ixz * ax + iyz * ay + izz * az
        tx = -jw * ay * wr - (ay * lz - az * ly)
        ty = jw * ax * wr - (az * lx - ax * lz)
        tz = -jw * wrdot - (ax * ly - ay * lx)
        return (
            j00 * tx + j01 * ty + j02 * tz,
            j10 * tx + j11 * ty + j12 * tz,
            j20 * tx + j21 * ty + j22 * tz,
        )

    for k in range(n_steps + 1):
        g = 2 * k
        d0 = rhs(wx, wy, wz, wr_grid[g], wrdot_grid[g])
        omega_rows.append((wx, wy, wz))
        omega_dot_rows.append(d0)
        quat_rows.append((qw, qx, qy, qz))
        if not (isfinite(wx) and isfinite(wy) and isfinite(wz)):
            raise IntegrationError(
                f"non-finite body rates at t={t_offset + k * dt:.6f} s; "
                "reduce the step or check the configuration",
                time=t_offset + k * dt,
            )
        if k == n_steps:
            break

        # quaternion rate for body rates: 0.5 * q x (0, w)
        q1 = (
            -0.5 * (qx * wx + qy * wy + qz * wz),
            0.5 * (qw * wx + qy * wz - qz * wy),
            0.5 * (qw * wy + qz * wx - qx * wz),
            0.5 * (qw * wz + qx * wy - qy * wx),
        )
        if rk4:
            k1 = d0
            a2 = (wx + half * k1[0], wy + half * k1[1], wz + half * k1[2])
            k2 = rhs(*a2, wr_grid[g + 1], wrdot_grid[g + 1])
            qm = (qw + half * q1[0], qx + half * q1[1], qy + half * q1[2], qz + half * q1[3])
            q2 = (
                -0.5 * (qm[1] * a2[0] + qm[2] * a2[1] + qm[3] * a2[2]),
                0.5 * (qm[0] * a2[0] + qm[2] * a2[2] - qm[3] * a2[1]),
                0.5 * (qm[0] * a2[1] + qm[3] * a2[0] - qm[1] * a2[2]),
                0.5 * (qm[0] * a2[2] + qm[1] * a2[1] - qm[2] * a2[0]),
            )
            a3 = (wx + half * k2[0], wy + half * k2[1], wz + half * k2[2])
            k3 = rhs(*a3, wr_grid[g + 1], wrdot_grid[g + 1])
            qm = (qw + half * q2[0], qx + half * q2[1], qy + half * q2[2], qz + half * q2[3])
            q3 = (
                -0.5 * (qm[1] * a3[0] + qm[2] * a3[1] + qm[3] * a3[2]),
                0.5 * (qm[0] * a3[0] + qm[2] * a3[2] - qm[3] * a3[1]),
                0.5 * (qm[0] * a3[1] + qm[3] * a3[0] - qm[1] * a3[2]),
                0.5 * (qm[0] * a3[2] + qm[1] * a3[1] - qm[2] * a3[0]),
            )
            a4 = (wx + dt * k3[0], wy + dt * k3[1], wz + dt * k3[2])
            k4 = rhs(*a4, wr_grid[g + 2], wrdot_grid[g + 2])
            qm = (qw + dt * q3[0], qx + dt * q3[1], qy + dt * q3[2], qz + dt * q3[3])
            q4 = (
                -0.5 * (qm[1] * a4[0] + qm[2] * a4[1] + qm[3] * a4[2]),
                0.5 * (qm[0] * a4[0] + qm[2] * a4[2] - qm[3] * a4[1]),
                0.5 * (qm[0] * a4[1] + qm[3] * a4[0] - qm[1] * a4[2]),
                0.5 * (qm[0] * a4[2] + qm[1] * a4[1] - qm[2] * a4[0]),
            )
            s = dt / 6.0
            wx += s * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0])
            wy += s * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1])
            wz += s * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2])
            qw += s * (q1[0] + 2.0 * (q2[0] + q3[0]) + q4[0])
            qx += s * (q1[1] + 2.0 * (q2[1] + q3[1]) + q4[1])
            qy += s * (q1[2] + 2.0 * (q2[2] + q3[2]) + q4[2])
            qz += s * (q1[3] + 2.0 * (q2[3] + q3[3]) + q4[3])
        else:
            wx += dt * d0[0]
            wy += dt * d0[1]
            wz += dt * d0[2]
            qw += dt * q1[0]
            qx += dt * q1[1]
            qy += dt * q1[2]
            qz += dt * q1[3]

        norm = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        qw /= norm
        qx /= norm
        qy /= norm
        qz /= norm

    return np.array(omega_rows), np.array(omega_dot_rows), np.array(quat_rows)


def simulate(cfg: SimConfig) -> SimOutput:
    """Run one throw and synthesise the ideal (noise-free) recording."""
    rate = cfg.sample_rate
    n_rest = int(round(cfg.rest_duration * rate))
    n_fall = int(round(cfg.duration * rate))
    n_hold = int(round(cfg.hold_duration * rate))
    if n_fall < 2:
        raise ValueError("free fall must span at least 2 samples")
    n = n_rest + n_fall + n_hold

    t = np.arange(n) / rate
    gyro = np.zeros((n, 3))
    accel = np.zeros((n, 3))
    wheel = np.full(n, cfg.wheel.initial_speed)
    omega_dot = np.zeros((n, 3))
    quat = np.zeros((n, 4))
    quat[:, 0] = 1.0

    # free fall: the last integration sample lands on index n_rest + n_fall - 1
    om, om_dot, q = _integrate_freefall(cfg, n_fall - 1, n_rest / rate)
    ff = slice(n_rest, n_rest + n_fall)
    gyro[ff] = om
    omega_dot[ff] = om_dot
    quat[ff] = q
    tau = (np.arange(n_fall)) / rate
    wheel[ff] = cfg.wheel.speed_at(tau)

    rho = cfg.imu_offset
    if np.any(rho != 0.0):
        accel[ff] = np.cross(om_dot, rho) + np.cross(om, np.cross(om, np.broadcast_to(rho, om.shape)))

    g_up = GRAVITY * cfg.rest_up_axis
    if n_rest:
        accel[:n_rest] = g_up
    if n_hold:
        accel[n_rest + n_fall :] = g_up
        wheel[n_rest + n_fall :] = wheel[n_rest + n_fall - 1]
        quat[n_rest + n_fall :] = quat[n_rest + n_fall - 1]

    rec = ThrowRecording(
        t=t,
        gyro=gyro,
        accel=accel,
        wheel_speed=wheel,
        sample_rate=rate,
        rest_window=(0, n_rest) if n_rest else None,
        freefall_window=(n_rest, n_rest + n_fall),
    )
    return SimOutput(recording=rec, quat=quat, omega_dot=omega_dot, config=cfg)


def corrupt(rec: ThrowRecording, noise: NoiseModel) -> ThrowRecording:
    """Apply the sensor model; bit-identical for identical seeds."""
    rng = np.random.default_rng(noise.seed)
    n, fs = rec.n, rec.sample_rate

    gyro = rec.gyro * (1.0 + noise.gyro_scale_error) + noise.gyro_bias
    gyro = gyro + rng.standard_normal((n, 3)) * NoiseModel.sample_sigma(noise.gyro_density, fs)
    accel = rec.accel + noise.accel_bias
    accel = accel + rng.standard_normal((n, 3)) * NoiseModel.sample_sigma(noise.accel_density, fs)
    wheel = rec.wheel_speed + rng.standard_normal(n) * NoiseModel.sample_sigma(noise.wheel_density, fs)

    return replace(rec, gyro=gyro, accel=accel, wheel_speed=wheel)
