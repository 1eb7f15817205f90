"""Estimator tests.

The regressor algebra is checked against first-principles torque arithmetic,
the solvers against fabricated systems with known answers, and the full
pipeline against simulator round trips where every ground-truth quantity is
known from the point-mass construction.
"""

import numpy as np
import pytest
from hypothesis import given, strategies as st

import synthetic
from oracles import euler_torque_residual

from tumblefit.dynamics import NoiseModel, WheelPulse, corrupt, simulate
from tumblefit.errors import (
    DataError,
    DegenerateProofError,
    RankDeficiencyError,
    WindowError,
)
from tumblefit.estimation import (
    DeviceCalibration,
    RegressorRow,
    build_regressor,
    calibrate,
    condition,
    correct_for_device,
    estimate_cog,
    estimate_throw,
    regressor_stack,
    solve_batch,
    solve_recursive,
)
from tumblefit.geometry import random_rotation
from tumblefit.inertia import InertiaTensor
from tumblefit.signals import FilterSpec, Window

Z = np.array([0.0, 0.0, 1.0])

finite = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


def rows_from_stack(A, b, n):
    return [RegressorRow(coeff=A[3 * k : 3 * k + 3], rhs=b[3 * k : 3 * k + 3]) for k in range(n)]


def fabricated_rows(theta, n_samples, rng):
    """Rows whose rhs is exactly coeff @ theta for random smooth kinematics."""
    omega = rng.uniform(-15.0, 15.0, (n_samples, 3))
    omega_dot = rng.uniform(-400.0, 400.0, (n_samples, 3))
    A, _ = regressor_stack(omega, omega_dot, np.zeros(n_samples), np.zeros(n_samples), 1.0)
    b = A @ np.asarray(theta, dtype=float)
    return rows_from_stack(A, b, n_samples), A, b


# -- regressor algebra ----------------------------------------------------


@given(st.lists(finite, min_size=12, max_size=12))
def test_regressor_identity_for_any_symmetric_tensor(values):
    theta = np.array(values[:6])
    omega = np.array(values[6:9])
    omega_dot = np.array(values[9:12])
    row = build_regressor(omega, omega_dot, 0.0, 0.0, 1.0)
    inertia = InertiaTensor(theta).matrix
    torque = row.coeff @ theta
    resid = euler_torque_residual(inertia, omega, omega_dot, torque)
    scale = max(1.0, np.abs(torque).max())
    assert np.abs(resid).max() < 1e-12 * scale


def test_regressor_rhs_is_wheel_reaction_torque():
    omega = np.array([3.0, -2.0, 5.0])
    j, speed, accel = 2e-6, 450.0, 3000.0
    row = build_regressor(omega, np.zeros(3), speed, accel, j)
    expected = -j * (accel * Z + np.cross(omega, speed * Z))
    assert np.allclose(row.rhs, expected, rtol=0.0, atol=1e-18)
    assert row.rhs[2] == pytest.approx(-j * accel)


def test_regressor_packing_order_via_pure_acceleration():
    # with omega = 0 the torque reduces to I @ omega_dot, which pins the
    # column ordering Ixx, Ixy, Iyy, Ixz, Iyz, Izz
    g = np.array([2.0, -3.0, 7.0])
    row = build_regressor(np.zeros(3), g, 0.0, 0.0, 1.0)
    expected = np.array(
        [
            [g[0], g[1], 0.0, g[2], 0.0, 0.0],
            [0.0, g[0], g[1], 0.0, g[2], 0.0],
            [0.0, 0.0, 0.0, g[0], g[1], g[2]],
        ]
    )
    assert np.array_equal(row.coeff, expected)


def test_stack_matches_single_sample_rows():
    rng = np.random.default_rng(3)
    omega = rng.normal(size=(5, 3))
    omega_dot = rng.normal(size=(5, 3))
    speed = rng.normal(size=5)
    accel = rng.normal(size=5)
    A, b = regressor_stack(omega, omega_dot, speed, accel, 2e-6)
    for k in range(5):
        row = build_regressor(omega[k], omega_dot[k], speed[k], accel[k], 2e-6)
        assert np.allclose(A[3 * k : 3 * k + 3], row.coeff, atol=1e-18)
        assert np.allclose(b[3 * k : 3 * k + 3], row.rhs, atol=1e-18)


def test_stack_accepts_tilted_wheel_axis():
    omega = np.array([[3.0, -2.0, 5.0]])
    axis = np.array([1.0, 0.0, 0.0])
    _, b = regressor_stack(omega, np.zeros((1, 3)), np.array([450.0]), np.array([3000.0]), 2e-6, axis=axis)
    expected = -2e-6 * (3000.0 * axis + np.cross(omega[0], 450.0 * axis))
    assert np.allclose(b, expected, atol=1e-18)


# -- solvers --------------------------------------------------------------


def test_batch_recovers_fabricated_parameters():
    theta = np.array([2448e-6, -1.2e-4, 750e-6, 8.0e-5, -3.1e-5, 2835e-6])
    rows, A, b = fabricated_rows(theta, 40, np.random.default_rng(11))
    est, rms, cond = solve_batch(rows)
    assert np.abs(est - theta).max() < 1e-10 * np.abs(theta).max()
    assert rms < 1e-10
    assert cond >= 1.0


def test_batch_scale_equivariance():
    theta = np.array([2448e-6, -1.2e-4, 750e-6, 8.0e-5, -3.1e-5, 2835e-6])
    rows, A, b = fabricated_rows(theta, 30, np.random.default_rng(5))
    scaled = rows_from_stack(A, 3.0 * b, 30)
    est1, _, _ = solve_batch(rows)
    est3, _, _ = solve_batch(scaled)
    assert np.allclose(est3, 3.0 * est1, rtol=1e-9, atol=0.0)


def test_batch_frame_equivariance():
    rng = np.random.default_rng(23)
    R = random_rotation(rng)
    inertia = InertiaTensor(np.array([2448e-6, -1.2e-4, 750e-6, 8.0e-5, -3.1e-5, 2835e-6]))
    omega = rng.uniform(-15.0, 15.0, (40, 3))
    omega_dot = rng.uniform(-400.0, 400.0, (40, 3))
    torque = omega_dot @ inertia.matrix.T + np.cross(omega, omega @ inertia.matrix.T)

    A_rot, _ = regressor_stack(omega @ R.T, omega_dot @ R.T, np.zeros(40), np.zeros(40), 1.0)
    b_rot = (torque @ R.T).reshape(-1)
    est, _, _ = solve_batch(rows_from_stack(A_rot, b_rot, 40))
    expected = inertia.rotated(R).vector
    assert np.abs(est - expected).max() < 1e-8 * np.abs(expected).max()


def test_batch_flags_unobservable_components_for_flat_spin():
    # spin locked to the z axis never excites Ixx, Ixy, or Iyy
    rows = []
    for k in range(30):
        rows.append(build_regressor([0.0, 0.0, 8.0 + 0.1 * k], [0.0, 0.0, 5.0 - 0.3 * k], 0.0, 0.0, 1.0))
    with pytest.raises(RankDeficiencyError) as err:
        solve_batch(rows)
    assert sorted(err.value.null_directions) == ["Ixx", "Ixy", "Iyy"]


def test_batch_needs_two_rows():
    row = build_regressor([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], 0.0, 0.0, 1.0)
    with pytest.raises(DataError):
        solve_batch([row])


def test_recursive_matches_batch_on_clean_data():
    theta = np.array([1525e-6, 4.0e-5, 190e-6, -6.0e-5, 2.2e-5, 1577e-6])
    rows, _, _ = fabricated_rows(theta, 300, np.random.default_rng(7))
    trace = solve_recursive(rows)
    batch, _, _ = solve_batch(rows)
    assert trace.shape == (300, 6)
    assert np.abs(trace[-1] - batch).max() < 1e-6 * np.abs(batch).max()


def test_recursive_forgetting_tracks_parameter_change():
    rng = np.random.default_rng(19)
    theta_old = np.array([1525e-6, 0.0, 190e-6, 0.0, 0.0, 1577e-6])
    theta_new = np.array([2448e-6, -1.0e-4, 750e-6, 5.0e-5, -2.0e-5, 2835e-6])
    rows_old, _, _ = fabricated_rows(theta_old, 200, rng)
    rows_new, _, _ = fabricated_rows(theta_new, 200, rng)
    trace = solve_recursive(rows_old + rows_new, forgetting=0.97)
    err_new = np.abs(trace[-1] - theta_new).max()
    err_old = np.abs(trace[-1] - theta_old).max()
    assert err_new < 0.05 * np.abs(theta_new).max()
    assert err_new < err_old


def test_recursive_rejects_bad_parameters():
    row = build_regressor([1.0, 2.0, 3.0], [4.0, 5.0, 6.0], 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        solve_recursive([row], forgetting=0.0)
    with pytest.raises(ValueError):
        solve_recursive([row], covariance_scale=-1.0)
    with pytest.raises(DataError):
        solve_recursive([])


# -- centre of gravity ----------------------------------------------------


def test_cog_exact_on_ideal_signals():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["B"], omega0=[7.0, -9.0, 12.0])
    out = simulate(rig.config)
    rec = out.recording
    fit = estimate_cog(rec.gyro, out.omega_dot, rec.accel)
    assert np.abs(fit.x_comb - rig.combined.cog).max() < 1e-10
    assert fit.residual_rms < 1e-9


def test_cog_requires_excitation():
    n = 200
    omega = np.tile([0.3, 0.2, 0.5], (n, 1))
    with pytest.raises(DataError, match="spin"):
        estimate_cog(omega, np.zeros((n, 3)), np.ones((n, 3)))


def test_cog_fixed_axis_offset_unobservable():
    n = 200
    omega = np.zeros((n, 3))
    omega[:, 2] = np.linspace(6.0, 9.0, n)
    omega_dot = np.zeros((n, 3))
    omega_dot[:, 2] = np.linspace(5.0, -5.0, n)
    with pytest.raises(RankDeficiencyError) as err:
        estimate_cog(omega, omega_dot, np.zeros((n, 3)))
    assert err.value.null_directions == ["z"]


def test_cog_reports_residual_scale():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["B"], omega0=[7.0, -9.0, 12.0])
    out = simulate(rig.config)
    rng = np.random.default_rng(2)
    noisy = out.recording.accel + rng.normal(scale=0.05, size=out.recording.accel.shape)
    fit = estimate_cog(out.recording.gyro, out.omega_dot, noisy)
    assert 0.03 < fit.residual_rms < 0.08


# -- device correction ----------------------------------------------------


def test_correction_inverts_composition_exactly():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["C"], omega0=[5.0, 3.0, -8.0])
    corr = correct_for_device(
        rig.combined.inertia, rig.combined.cog, rig.calibration, rig.object_props.mass
    )
    scale = np.abs(rig.object_props.inertia.vector).max()
    assert np.abs((corr.i_obj - rig.object_props.inertia).vector).max() < 1e-10 * scale
    assert np.abs(corr.x_obj - rig.object_props.cog).max() < 1e-12
    assert corr.positive_definite


def test_correction_with_massless_device_is_identity():
    cal = DeviceCalibration(m_dev=0.0, x_dev=np.zeros(3), i_dev=InertiaTensor.zero(), i_r_zz=2e-6)
    i_comb = InertiaTensor.from_diagonal([4e-4, 5e-4, 6e-4])
    x_comb = np.array([0.01, -0.02, 0.03])
    corr = correct_for_device(i_comb, x_comb, cal, 0.5)
    assert np.array_equal(corr.i_obj.vector, i_comb.vector)
    assert np.array_equal(corr.x_obj, x_comb)


def test_correction_rejects_nonpositive_mass():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["E"], omega0=[5.0, 3.0, -8.0])
    with pytest.raises(DataError):
        correct_for_device(rig.combined.inertia, rig.combined.cog, rig.calibration, 0.0)


def test_correction_flags_nonphysical_result():
    # subtracting the device from something lighter than the device itself
    # cannot leave a physical tensor; that is reported, not raised
    cal = synthetic.true_calibration()
    tiny = InertiaTensor.from_diagonal([1e-6, 1e-6, 1e-6])
    corr = correct_for_device(tiny, np.zeros(3), cal, 0.01)
    assert not corr.positive_definite


# -- conditioning pipeline -------------------------------------------------


def test_condition_trims_manual_window_by_filter_settling():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["E"], omega0=[7.0, -9.0, 12.0])
    rec = simulate(rig.config).recording
    margin = FilterSpec().transient_samples(rec.sample_rate)
    ct = condition(rec, window=Window(300, 2100))
    assert ct.window == Window(300 + margin, 2100 - margin)
    assert ct.n == 1800 - 2 * margin
    assert ct.omega.shape == (ct.n, 3)


def test_condition_trims_annotated_window_by_filter_settling():
    rig = synthetic.rig_for(
        *synthetic.TEST_ARTICLES["E"],
        omega0=[7.0, -9.0, 12.0],
        rest_duration=0.1,
        duration=0.8,
        hold_duration=0.1,
    )
    rec = simulate(rig.config).recording
    assert rec.freefall_window == (400, 3600)
    margin = FilterSpec().transient_samples(rec.sample_rate)
    ct = condition(rec)
    assert ct.window == Window(400 + margin, 3600 - margin)


def test_condition_rejects_window_consumed_by_margins():
    rig = synthetic.rig_for(
        *synthetic.TEST_ARTICLES["E"],
        omega0=[7.0, -9.0, 12.0],
        rest_duration=0.1,
        duration=0.13,
        hold_duration=0.1,
    )
    rec = simulate(rig.config).recording
    with pytest.raises(WindowError):
        condition(rec)


def test_condition_removes_rest_bias_automatically():
    rig = synthetic.rig_for(
        *synthetic.TEST_ARTICLES["E"],
        omega0=[7.0, -9.0, 12.0],
        rest_duration=0.15,
        duration=0.8,
        hold_duration=0.05,
    )
    out = simulate(rig.config)
    noise = NoiseModel(gyro_bias=(9e-3, -9e-3, 4.5e-3), accel_bias=(0.12, -0.196, 0.07))
    biased = corrupt(out.recording, noise)
    ct = condition(biased)
    truth = condition(out.recording)
    assert np.abs(ct.omega - truth.omega).max() < 1e-9
    # a resting accelerometer cannot tell bias from tilt: the component of
    # the bias transverse to gravity survives, the rest is removed
    transverse = np.linalg.norm([0.12, -0.196])
    resid = np.abs(ct.accel - truth.accel).max()
    assert resid < 1.1 * transverse
    assert resid > 0.0


# -- end-to-end single throw ----------------------------------------------


def test_estimate_throw_noiseless_round_trip():
    mass, moments = synthetic.TEST_ARTICLES["B"]
    rig = synthetic.rig_for(
        mass,
        moments,
        omega0=[7.0, -9.0, 12.0],
        rest_duration=0.15,
        duration=1.0,
        hold_duration=0.1,
    )
    rec = simulate(rig.config).recording
    res = estimate_throw(rec, rig.calibration, mass)

    truth = rig.object_props.inertia.vector
    scale = np.abs(truth).max()
    assert np.abs(res.i_obj.vector - truth).max() < 0.005 * scale
    assert np.abs(res.x_obj - rig.object_props.cog).max() < 1e-4
    assert res.comb_positive_definite and res.obj_positive_definite
    assert res.condition_number >= 1.0
    # principal moments should match to the same grade
    assert np.allclose(
        res.i_obj.eigenvalues(), sorted(moments), rtol=0.005, atol=0.0
    )


def test_estimate_throw_with_experiment_grade_noise():
    mass, moments = synthetic.TEST_ARTICLES["B"]
    rig = synthetic.rig_for(
        mass,
        moments,
        omega0=[7.0, -9.0, 12.0],
        rest_duration=0.25,
        duration=1.0,
        hold_duration=0.1,
    )
    rec = corrupt(simulate(rig.config).recording, NoiseModel.experiment(seed=17))
    res = estimate_throw(rec, rig.calibration, mass)

    truth = rig.object_props.inertia.vector
    scale = np.abs(truth).max()
    assert np.abs(res.i_obj.vector - truth).max() < 0.03 * scale
    # the CoG inherits the transverse accelerometer bias left over after
    # rest-window correction (~0.2 m/s^2 against ~300 1/s^2 of excitation)
    assert np.abs(res.x_obj - rig.object_props.cog).max() < 1.5e-3


def test_estimate_throw_rejects_bad_mass():
    rig = synthetic.rig_for(*synthetic.TEST_ARTICLES["E"], omega0=[7.0, -9.0, 12.0])
    rec = simulate(rig.config).recording
    with pytest.raises(DataError):
        estimate_throw(rec, rig.calibration, -1.0)


# -- calibration -----------------------------------------------------------


make_calibration_recordings = synthetic.make_calibration_recordings


def test_calibration_noiseless_round_trip():
    device_recs, proof_recs = make_calibration_recordings()
    proof = synthetic.proof_body()
    cal = calibrate(device_recs, proof_recs, proof.inertia, proof.mass, synthetic.DEVICE_MASS)

    truth = synthetic.true_calibration()
    assert cal.i_r_zz == pytest.approx(truth.i_r_zz, rel=0.005)
    scale = np.abs(truth.i_dev.vector).max()
    assert np.abs(cal.i_dev.vector - truth.i_dev.vector).max() < 0.01 * scale
    assert np.abs(cal.x_dev - truth.x_dev).max() < 2e-4
    assert cal.provenance["device_throws"] == 2
    assert cal.provenance["proof_throws"] == 1


def test_calibration_with_experiment_grade_noise():
    device_recs, proof_recs = make_calibration_recordings(noise_seeds=(101, 102, 103))
    proof = synthetic.proof_body()
    cal = calibrate(device_recs, proof_recs, proof.inertia, proof.mass, synthetic.DEVICE_MASS)

    truth = synthetic.true_calibration()
    assert cal.i_r_zz == pytest.approx(truth.i_r_zz, rel=0.03)
    scale = np.abs(truth.i_dev.vector).max()
    assert np.abs(cal.i_dev.vector - truth.i_dev.vector).max() < 0.05 * scale


def test_calibration_rejects_zero_mass_proof():
    device_recs, proof_recs = make_calibration_recordings()
    proof = synthetic.proof_body()
    with pytest.raises(DegenerateProofError):
        calibrate(device_recs, proof_recs, proof.inertia, 0.0, synthetic.DEVICE_MASS)


def test_calibration_rejects_ineffective_proof():
    # identical dynamics in both configurations leave no measurable shift
    device_recs, _ = make_calibration_recordings()
    proof = synthetic.proof_body()
    with pytest.raises(DegenerateProofError, match="changed the combined inertia"):
        calibrate(device_recs, device_recs, proof.inertia, proof.mass, synthetic.DEVICE_MASS)
