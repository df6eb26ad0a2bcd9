# tests/test_simkit.py
import math

import numpy as np
import pytest

from mmlio.errors import RangeError
from mmlio.geom import Pose, Quaternion, skew
from mmlio.imu.measurements import ImuSeries
from mmlio.pipeline.dataset import read_dataset
from mmlio.simkit import (
    GRAVITY, Patch, TrajectorySpec, World, ground_truth, make_scene, preset, simulate_imu,
    simulate_scan, stationary,
)
from mmlio.simkit.dataset import simulate_dataset, write_dataset


def straight_line(speed, t1, start=(0.0, 0.0, 0.0)):
    times = np.linspace(0.0, t1, 5)
    poses = [Pose.from_translation(np.add(start, [speed * t, 0.0, 0.0])) for t in times]
    return TrajectorySpec(times, poses)


def far_wall(x):
    return World([Patch([x, -100.0, -100.0], [0.0, 200.0, 0.0], [0.0, 0.0, 200.0])])


def test_parallel_patch_edges_are_rejected():
    with pytest.raises(RangeError):
        Patch([0, 0, 0], [1, 0, 0], [2, 0, 0])


def test_static_wall_depth(solid_state_model):
    traj = stationary(Pose.identity(), 0.0, 1.0)
    scan = simulate_scan(far_wall(1.0), solid_state_model, traj, 0.0)
    assert len(scan) > 0
    # every hit lies on the plane x = 1
    assert np.allclose(scan.xyz[:, 0], 1.0, atol=1e-6)
    assert np.min(scan.ranges()) == pytest.approx(1.0, abs=1e-3)


def test_spinning_rings_span_all_channels(room_world, spinning_model):
    traj = stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0)
    scan = simulate_scan(room_world, spinning_model, traj, 0.0)
    assert sorted(set(scan.ring.tolist())) == list(range(16))


def test_motion_distortion_toward_wall(spinning_model):
    traj = straight_line(1.0, 2.0)
    scan = simulate_scan(far_wall(10.0), spinning_model, traj, 0.0)
    # sensor frame x of a wall hit is the remaining distance at emission time
    assert np.allclose(scan.xyz[:, 0], 10.0 - scan.t, atol=1e-5)
    first, last = np.argmin(scan.t), np.argmax(scan.t)
    assert scan.xyz[first, 0] - scan.xyz[last, 0] == pytest.approx(0.1, abs=2e-3)


def test_empty_world_and_short_trajectory(spinning_model):
    traj = stationary(Pose.identity(), 0.0, 0.05)
    with pytest.raises(RangeError):
        simulate_scan(far_wall(1.0), spinning_model, traj, 0.0)
    traj = stationary(Pose.identity(), 0.0, 1.0)
    assert len(simulate_scan(World(), spinning_model, traj, 0.0)) == 0


def test_point_times_inside_sweep(room_world, spinning_model, solid_state_model):
    traj = stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0)
    for model in (spinning_model, solid_state_model):
        scan = simulate_scan(room_world, model, traj, 0.3)
        assert np.all(scan.t > scan.t_start)
        assert np.all(scan.t < scan.t_end)


def test_simulation_is_deterministic(room_world):
    model = preset("solid_state", pattern_seed=7)
    traj = stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0)
    a = simulate_scan(room_world, model, traj, 0.2, noise_seed=3)
    b = simulate_scan(room_world, model, traj, 0.2, noise_seed=3)
    assert a.same_points(b)


def test_solid_state_pattern_does_not_repeat(room_world, solid_state_model):
    traj = stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0)
    a = simulate_scan(room_world, solid_state_model, traj, 0.0)
    b = simulate_scan(room_world, solid_state_model, traj, 0.1)
    assert not np.allclose(a.xyz[:100], b.xyz[:100])


def test_imu_statics():
    traj = stationary(Pose.identity(), 0.0, 1.0)
    imu = simulate_imu(traj, 200.0, gravity=GRAVITY)
    assert np.allclose(imu.accel, [0.0, 0.0, 9.81], atol=1e-12)
    assert np.allclose(imu.gyro, 0.0, atol=1e-12)
    biased = simulate_imu(traj, 200.0, bias=(np.zeros(3), [0.01, 0.0, 0.0]))
    assert np.allclose(biased.gyro, [0.01, 0.0, 0.0], atol=1e-12)


def test_imu_constant_acceleration():
    times = np.arange(5.0)
    poses = [Pose.from_translation([0.5 * t * t, 0.0, 0.0]) for t in times]
    imu = simulate_imu(TrajectorySpec(times, poses), 200.0)
    assert np.allclose(imu.accel, [1.0, 0.0, 9.81], atol=1e-9)


def test_imu_rate_minimum():
    traj = stationary(Pose.identity(), 0.0, 1.0)
    with pytest.raises(RangeError):
        simulate_imu(traj, 50.0)


def wavy_trajectory(t1=10.0):
    times = np.arange(0.0, t1 + 1e-9, 0.5)
    poses = []
    for t in times:
        q = Quaternion.from_rotvec([0.2 * math.sin(0.7 * t), 0.1 * math.cos(0.5 * t), 0.4 * t])
        poses.append(Pose(q, [2.0 * math.sin(0.3 * t), 1.5 * math.cos(0.4 * t), 0.2 * t]))
    return TrajectorySpec(times, poses)


def test_rk4_integration_recovers_trajectory():
    traj = wavy_trajectory()
    rate = 1000.0
    imu = simulate_imu(traj, rate)
    h = 2.0 / rate
    g = GRAVITY

    def deriv(R, v, w, a):
        return R @ skew(w), R @ a + g, v

    R = traj.rotation_matrices(0.0)[0]
    p = traj.position(0.0)[0]
    v = traj.velocity(0.0)[0]
    for k in range(0, len(imu) - 2, 2):
        stage = [(imu.gyro[k + i], imu.accel[k + i]) for i in (0, 1, 1, 2)]
        k1 = deriv(R, v, *stage[0])
        k2 = deriv(R + 0.5 * h * k1[0], v + 0.5 * h * k1[1], *stage[1])
        k3 = deriv(R + 0.5 * h * k2[0], v + 0.5 * h * k2[1], *stage[2])
        k4 = deriv(R + h * k3[0], v + h * k3[1], *stage[3])
        p = p + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        v = v + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        R = R + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        U, _, Vt = np.linalg.svd(R)
        R = U @ Vt
    t_end = imu.t[k + 2]
    truth = traj.pose(t_end)
    assert np.linalg.norm(p - truth.translation) < 1e-4
    assert Quaternion.from_matrix(R).angle_to(truth.rotation) < 1e-4


def test_trajectory_rejects_unordered_times():
    with pytest.raises(RangeError):
        TrajectorySpec([0.0, 0.0], [Pose.identity(), Pose.identity()])


def test_write_read_round_trip(tmp_path, room_world, spinning_model):
    traj = stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0)
    scans = [simulate_scan(room_world, spinning_model, traj, 0.1 * k) for k in range(3)]
    imu = simulate_imu(traj, 200.0)
    write_dataset(scans, imu, ground_truth(traj, imu.t), str(tmp_path))
    ds = read_dataset(str(tmp_path))
    for k, scan in enumerate(scans):
        assert ds.load_scan("v", k).same_points(scan)
    assert np.array_equal(ds.imu.accel, imu.accel)
    assert ds.groundtruth.shape == (len(imu), 8)


def test_empty_imu_series(tmp_path, room_world, spinning_model):
    traj = stationary(Pose.identity(), 0.0, 1.0)
    write_dataset([simulate_scan(room_world, spinning_model, traj, 0.0)], ImuSeries.empty(),
                  None, str(tmp_path))
    ds = read_dataset(str(tmp_path))
    assert len(ds.imu) == 0
    assert ds.groundtruth is None


def test_scene_dataset_lists_monotone_scans(tmp_path):
    short = make_scene("static", duration=1.0)
    manifest = simulate_dataset(short, str(tmp_path), sensors=("v",))
    starts = [s.t_start for s in manifest.sensors["v"].scans]
    assert len(starts) == 10
    assert all(b > a for a, b in zip(starts, starts[1:]))


def test_scene_presets_match_sensor_specs():
    scenario = make_scene("corridor")
    v, h = scenario.sensors["v"], scenario.sensors["h"]
    assert (v.h_fov, v.v_fov, v.channels_or_lines) == (360.0, 30.0, 16)
    assert (h.h_fov, h.v_fov) == (81.7, 25.1)
    assert make_scene("hall").closed_loop
    with pytest.raises(KeyError):
        make_scene("forest")


def test_solid_state_sweeps_are_offset(tmp_path):
    manifest = simulate_dataset(make_scene("static", duration=1.0), str(tmp_path))
    v0 = manifest.sensors["v"].scans[0].t_start
    h0 = manifest.sensors["h"].scans[0].t_start
    assert h0 - v0 == pytest.approx(0.017)
