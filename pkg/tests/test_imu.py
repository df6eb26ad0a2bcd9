# tests/test_imu.py
import math

import numpy as np
import pytest

from mmlio.errors import RangeError, UndistortionError
from mmlio.geom import NavState, Pose, Quaternion
from mmlio.imu import (
    ImuSeries, PreintegratedImu, preintegrate, predict_state, static_initialization,
    undistort_scan,
)
from mmlio.scan import Scan
from mmlio.simkit import GRAVITY, TrajectorySpec, World, room, simulate_imu, simulate_scan, stationary


def rz(deg):
    return Quaternion.from_axis_angle([0, 0, 1], math.radians(deg))


def constant_series(gyro, accel, t1, rate=200.0):
    t = np.linspace(0.0, t1, int(round(t1 * rate)) + 1)
    return ImuSeries(t, np.tile(gyro, (len(t), 1)), np.tile(accel, (len(t), 1)))


def wavy_trajectory(t1=12.0):
    times = np.arange(0.0, t1 + 1e-9, 0.5)
    poses = []
    for t in times:
        q = Quaternion.from_rotvec([0.3 * math.sin(0.9 * t), 0.2 * math.cos(0.6 * t), 0.5 * t])
        poses.append(Pose(q, [2.0 * math.sin(0.5 * t), 1.5 * math.cos(0.4 * t), 0.3 * t]))
    return TrajectorySpec(times, poses)


def true_deltas(traj, t0, t1):
    R0 = traj.rotation_matrices(t0)[0]
    R1 = traj.rotation_matrices(t1)[0]
    p0, p1 = traj.position(t0)[0], traj.position(t1)[0]
    v0, v1 = traj.velocity(t0)[0], traj.velocity(t1)[0]
    dt = t1 - t0
    dQ = Quaternion.from_matrix(R0.T @ R1)
    dV = R0.T @ (v1 - v0 - GRAVITY * dt)
    dP = R0.T @ (p1 - p0 - v0 * dt - 0.5 * GRAVITY * dt * dt)
    return dQ, dV, dP


@pytest.fixture(scope='module')
def wavy():
    traj = wavy_trajectory()
    return traj, simulate_imu(traj, 200.0)


# --- preintegrate ---

def test_preintegrate_at_rest():
    delta = preintegrate(constant_series([0, 0, 0], [0, 0, 0], 1.0))
    assert np.allclose(delta.dP, 0.0) and np.allclose(delta.dV, 0.0)
    assert delta.dQ.angle() < 1e-12
    assert delta.dt_total == pytest.approx(1.0)


def test_preintegrate_constant_acceleration():
    delta = preintegrate(constant_series([0, 0, 0], [1, 0, 0], 2.0))
    assert np.allclose(delta.dV, [2, 0, 0], atol=1e-12)
    assert np.allclose(delta.dP, [2, 0, 0], atol=1e-12)


def test_preintegrate_constant_rate():
    delta = preintegrate(constant_series([0, 0, math.pi / 2], [0, 0, 0], 1.0))
    assert delta.dQ.angle_to(rz(90)) < 1e-6


def test_preintegrate_rejects_bad_input():
    with pytest.raises(RangeError):
        preintegrate(ImuSeries([0.0], [[0, 0, 0]], [[0, 0, 0]]))
    series = ImuSeries([0.0, 0.1, 0.1], np.zeros((3, 3)), np.zeros((3, 3)))
    with pytest.raises(RangeError):
        preintegrate(series)


def test_preintegration_matches_trajectory(wavy):
    traj, imu = wavy
    rng = np.random.default_rng(21)
    for t0 in rng.uniform(0.0, traj.t_max - 1.0, size=50):
        t0 = round(t0 * 200.0) / 200.0
        delta = preintegrate(imu.window(t0, t0 + 1.0))
        dQ, dV, dP = true_deltas(traj, t0, t0 + 1.0)
        assert np.linalg.norm(delta.dP - dP) < 1e-4
        assert delta.dQ.angle_to(dQ) < 1e-5


def test_covariance_is_symmetric_psd(wavy):
    _, imu = wavy
    delta = preintegrate(imu.window(1.0, 2.0))
    assert np.allclose(delta.cov, delta.cov.T)
    assert np.linalg.eigvalsh(delta.cov).min() > -1e-15
    assert np.linalg.eigvalsh(delta.covariance15()).min() > 0.0


def test_bias_correction_is_first_order(wavy):
    _, imu = wavy
    window = imu.window(3.0, 3.5)
    rng = np.random.default_rng(5)
    b_a, b_g = rng.normal(size=3) * 0.02, rng.normal(size=3) * 0.002
    delta = preintegrate(window, (b_a, b_g))
    for _ in range(10):
        d_a, d_g = rng.normal(size=3), rng.normal(size=3)
        d_a *= 1e-3 / np.linalg.norm(d_a)
        d_g *= 1e-3 / np.linalg.norm(d_g)
        exact = preintegrate(window, (b_a + d_a, b_g + d_g))
        dQ, dV, dP = delta.corrected(b_a + d_a, b_g + d_g)
        assert dQ.angle_to(exact.dQ) < 1e-6
        assert np.linalg.norm(dV - exact.dV) < 1e-6
        assert np.linalg.norm(dP - exact.dP) < 1e-6


def test_split_interval_composes(wavy):
    _, imu = wavy
    whole = imu.window(4.0, 5.0)
    head = imu.window(4.0, 4.4)
    tail = imu.window(4.4, 5.0)
    bias = (np.array([0.01, -0.02, 0.005]), np.array([0.001, 0.0, -0.002]))
    joined = preintegrate(head, bias).compose(preintegrate(tail, bias))
    full = preintegrate(whole, bias)
    assert joined.dQ.angle_to(full.dQ) < 1e-8
    assert np.allclose(joined.dV, full.dV, atol=1e-8)
    assert np.allclose(joined.dP, full.dP, atol=1e-8)
    for name in ("J_R_bg", "J_V_ba", "J_V_bg", "J_P_ba", "J_P_bg"):
        assert np.allclose(getattr(joined, name), getattr(full, name), atol=1e-8)
    assert np.allclose(joined.cov, full.cov, atol=1e-12)
    assert joined.dt_total == pytest.approx(1.0)


def test_compose_requires_contiguous_intervals(wavy):
    _, imu = wavy
    a = preintegrate(imu.window(1.0, 1.5))
    b = preintegrate(imu.window(1.6, 2.0))
    with pytest.raises(RangeError):
        a.compose(b)


# --- predict_state ---

def test_predict_identity():
    x = predict_state(NavState.identity(), PreintegratedImu.identity(0.0, 1.0), np.zeros(3))
    assert np.allclose(x.p, 0.0) and np.allclose(x.v, 0.0)
    assert x.q.angle() < 1e-12


def test_predict_rotates_delta():
    prev = NavState(q=rz(90))
    delta = PreintegratedImu(0.0, 1.0, dP=[1.0, 0.0, 0.0])
    x = predict_state(prev, delta, np.zeros(3))
    assert np.allclose(x.p, [0.0, 1.0, 0.0], atol=1e-12)


def test_predict_constant_rate_turn():
    # 2 s on a 3 m circle at 1 m/s, heading tangent to the path
    rate, radius = 1.0 / 3.0, 3.0
    times = np.arange(0.0, 2.01, 0.1)
    poses = [Pose(rz(math.degrees(rate * t) + 90.0),
                  [radius * math.cos(rate * t), radius * math.sin(rate * t), 1.0])
             for t in times]
    traj = TrajectorySpec(times, poses)
    imu = simulate_imu(traj, 200.0)
    start = traj.pose(0.0)
    prev = NavState(start.translation, start.rotation, traj.velocity(0.0)[0])
    x = predict_state(prev, preintegrate(imu), GRAVITY)
    truth = traj.pose(2.0)
    assert np.linalg.norm(x.p - truth.translation) < 1e-3
    assert x.q.angle_to(truth.rotation) < 1e-3
    assert np.allclose(x.b_a, prev.b_a) and np.allclose(x.b_g, prev.b_g)


# --- undistort_scan ---

def test_undistort_identity_is_bit_exact():
    xyz = np.random.default_rng(0).normal(size=(20, 3))
    scan = Scan("v", 0.0, 0.1, np.linspace(0.001, 0.099, 20), xyz, np.zeros(20, np.uint8))
    out = undistort_scan(scan, PreintegratedImu.identity(0.0, 0.1))
    assert out.same_points(scan)


def test_undistort_pure_translation():
    scan = Scan("v", 0.0, 0.1, [0.05], [[2.0, 1.0, 0.0]], [0])
    delta = PreintegratedImu(0.0, 0.1, dP=[0.1, 0.0, 0.0])
    out = undistort_scan(scan, delta)
    assert np.allclose(out.xyz[0], [1.95, 1.0, 0.0], atol=1e-12)
    assert np.array_equal(out.t, scan.t)


def test_undistort_rejects_points_outside_interval():
    scan = Scan("v", 0.0, 0.1, [0.05, 0.2], [[1, 0, 0], [1, 0, 0]], [0, 0])
    with pytest.raises(UndistortionError) as exc:
        undistort_scan(scan, PreintegratedImu(0.0, 0.1, dP=[0.1, 0.0, 0.0]))
    assert exc.value.index == 1


def wall_rms(points):
    centered = points - points.mean(axis=0)
    return float(np.sqrt(np.linalg.eigvalsh(centered.T @ centered / len(points))[0]))


def test_undistortion_flattens_a_fast_turn(spinning_model):
    times = np.arange(0.0, 1.01, 0.1)
    poses = [Pose(Quaternion.from_axis_angle([0, 0, 1], 3.0 * t), [0.0, 0.0, 1.5])
             for t in times]
    traj = TrajectorySpec(times, poses)
    scan = simulate_scan(World(room(8.0, 6.0, 3.0)), spinning_model, traj, 0.4)

    # points on the x = +4 wall, found with the true per-point poses
    R = traj.rotation_matrices(scan.t)
    world = np.einsum("nij,nj->ni", R, scan.xyz) + traj.position(scan.t)
    on_wall = (np.abs(world[:, 0] - 4.0) < 1e-3) & (np.abs(world[:, 1]) < 2.5) \
        & (world[:, 2] > 0.2) & (world[:, 2] < 2.8)
    assert on_wall.sum() > 100

    imu = simulate_imu(traj, 200.0)
    delta = preintegrate(imu.window(scan.t_start, scan.t_end))
    start = traj.pose(scan.t_start)
    state = NavState(start.translation, start.rotation, traj.velocity(scan.t_start)[0])
    out = undistort_scan(scan, delta, state=state, gravity=GRAVITY)
    assert wall_rms(out.xyz[on_wall]) < 0.2 * wall_rms(scan.xyz[on_wall])


# --- static initialization ---

def test_static_initialization_levels_attitude():
    tilt = Quaternion.from_rotvec([math.radians(4.0), math.radians(-3.0), 0.0])
    truth = Pose(tilt, [0.0, 0.0, 1.0])
    traj = stationary(truth, 0.0, 2.0)
    imu = simulate_imu(traj, 200.0, bias=(np.zeros(3), [0.002, -0.001, 0.003]))
    state = static_initialization(imu, 0.0, 2.0)
    g_body = state.q.matrix.T @ GRAVITY
    assert np.allclose(g_body, tilt.matrix.T @ GRAVITY, atol=1e-9)
    assert np.allclose(state.b_g, [0.002, -0.001, 0.003], atol=1e-12)
    assert np.allclose(state.p, 0.0)
    with pytest.raises(RangeError):
        static_initialization(imu, 5.0, 6.0)
