# tests/test_precal.py
import math

import numpy as np
import pytest

from mmlio.errors import ConvergenceError, InsufficientPointsError, QueueOrderError, RangeError
from mmlio.geom import Pose, Quaternion, apply
from mmlio.precal import (
    AlignmentQueue, ExtrinsicSet, GicpParams, accumulate_frames, align_time_domain,
    calibrate_extrinsics, chain_extrinsics, gicp_align, synthesize_timestamps,
)
from mmlio.scan import Scan
from mmlio.simkit import simulate_scan, stationary


def yaw(deg, t=(0.0, 0.0, 0.0)):
    return Pose(Quaternion.from_axis_angle([0, 0, 1], math.radians(deg)), t)


@pytest.fixture(scope='module')
def room_cloud(room_scenario):
    """Three stationary spinning sweeps of the furnished calibration room."""
    traj = stationary(Pose.from_translation([0.3, -0.2, 1.2]), 0.0, 1.0)
    scans = [simulate_scan(room_scenario.world, room_scenario.sensors["v"], traj, 0.1 * k)
             for k in range(3)]
    return accumulate_frames(scans, 3)


@pytest.fixture(scope='module')
def stationary_sweeps(room_scenario):
    traj = room_scenario.traj
    sweeps = {}
    for sensor, offset in (("v", 0.0), ("h", room_scenario.h_offset)):
        model = room_scenario.sensors[sensor]
        sweeps[sensor] = [
            simulate_scan(room_scenario.world, model, traj, offset + 0.1 * k,
                          extrinsic=room_scenario.extrinsic(sensor))
            for k in range(10)
        ]
    return sweeps


def make_h_scan(times, t_start=None, t_end=None):
    times = np.asarray(times, dtype=np.float64)
    t_start = times[0] if t_start is None else t_start
    t_end = times[-1] + 1e-3 if t_end is None else t_end
    xyz = np.column_stack([np.ones(len(times)), times, np.zeros(len(times))])
    return Scan("h", t_start, t_end, times, xyz, np.zeros(len(times), np.uint8))


# --- accumulate_frames ---

def test_accumulate_single_frame(stationary_sweeps):
    scan = stationary_sweeps["v"][0]
    assert np.array_equal(accumulate_frames([scan], 1), scan.xyz)


def test_accumulate_counts_points(stationary_sweeps):
    scans = stationary_sweeps["v"]
    cloud = accumulate_frames(scans, 10)
    assert len(cloud) == sum(len(s) for s in scans)
    with pytest.raises(RangeError):
        accumulate_frames(scans[:3], 4)
    with pytest.raises(RangeError):
        accumulate_frames(scans, 0)


def test_accumulate_is_a_union(stationary_sweeps):
    scan = stationary_sweeps["v"][0]
    front = scan.subset(scan.xyz[:, 0] >= 0.0)
    back = scan.subset(scan.xyz[:, 0] < 0.0)
    cloud = accumulate_frames([front, back], 2)
    assert cloud[:, 0].min() == back.xyz[:, 0].min()
    assert cloud[:, 0].max() == front.xyz[:, 0].max()


# --- gicp_align ---

def test_gicp_self_alignment(room_cloud):
    T, fitness = gicp_align(room_cloud, room_cloud, Pose.identity())
    assert T.rotation.angle() < 1e-6
    assert np.linalg.norm(T.translation) < 1e-6
    assert fitness < 1e-9


def test_gicp_recovers_shift(room_cloud):
    target = room_cloud + np.array([0.1, 0.0, 0.0])
    T, _ = gicp_align(room_cloud, target, Pose.identity())
    assert np.allclose(T.translation, [0.1, 0.0, 0.0], atol=1e-3)


@pytest.mark.slow
def test_gicp_random_transforms(room_cloud):
    rng = np.random.default_rng(11)
    for _ in range(20):
        axis = rng.normal(size=3)
        angle = math.radians(rng.uniform(0.0, 10.0))
        t = rng.normal(size=3)
        t *= rng.uniform(0.0, 0.5) / np.linalg.norm(t)
        T = Pose(Quaternion.from_axis_angle(axis, angle), t)
        est, _ = gicp_align(apply(T, room_cloud), room_cloud, Pose.identity())
        err = est.compose(T)
        assert np.linalg.norm(err.translation) < 1e-2
        assert math.degrees(err.rotation.angle()) < 0.2


def test_gicp_needs_points(room_cloud):
    with pytest.raises(InsufficientPointsError):
        gicp_align(room_cloud[:10], room_cloud)


def test_gicp_without_overlap_reports_last_iterate(room_cloud):
    with pytest.raises(ConvergenceError) as exc:
        gicp_align(room_cloud, room_cloud + 100.0, Pose.identity())
    assert exc.value.last_iterate is not None


def test_gicp_params_are_validated():
    with pytest.raises(ValueError):
        GicpParams(k_neighbors=1)


# --- extrinsics ---

def test_chain_extrinsics_examples():
    I = Pose.identity()
    assert chain_extrinsics(I, I).rotation.angle() < 1e-12
    shifted = chain_extrinsics(Pose.from_translation([1, 0, 0]), I)
    assert np.allclose(shifted.translation, [1, 0, 0])
    T_v_to_h = yaw(90)
    T_h_to_i = Pose.from_translation([0, 1, 0])
    T = chain_extrinsics(T_v_to_h, T_h_to_i)
    assert np.allclose(T.matrix(), T_h_to_i.matrix() @ T_v_to_h.matrix(), atol=1e-12)


def test_extrinsic_set_keeps_chain():
    extr = ExtrinsicSet(yaw(-90, [0.15, 0.0, 0.05]), yaw(5, [0.2, 0.1, 0.0]))
    expected = extr.T_h_to_i.compose(extr.T_v_to_h)
    assert extr.T_v_to_i.angle_to(expected) < 1e-9
    assert extr.T_v_to_i.distance_to(expected) < 1e-9
    back = ExtrinsicSet.from_v_to_i(extr.T_v_to_i, extr.T_h_to_i)
    assert back.T_v_to_h.distance_to(extr.T_v_to_h) < 1e-9
    assert extr.as_report()["fitness_m2"] is None


def test_calibration_recovers_room_extrinsic(room_scenario, stationary_sweeps):
    extr = calibrate_extrinsics(stationary_sweeps["v"], stationary_sweeps["h"],
                                room_scenario.T_h_to_i)
    truth = room_scenario.T_v_to_h
    assert extr.T_v_to_h.distance_to(truth) < 1e-2
    assert math.degrees(extr.T_v_to_h.angle_to(truth)) < 0.2


# --- temporal alignment ---

def test_alignment_definition():
    queue = AlignmentQueue()
    queue.push(make_h_scan(np.linspace(0.0, 0.25, 26)))
    v_scan = Scan.empty("v", 0.10, 0.20)
    frame = align_time_domain(queue, v_scan)
    assert frame.t.min() >= 0.10 and frame.t.max() <= 0.20
    assert np.all(queue.timestamps > 0.20)
    assert queue.back == pytest.approx(0.25)
    assert queue.conserved()


def test_alignment_with_stale_queue():
    queue = AlignmentQueue()
    queue.push(make_h_scan([0.01, 0.02, 0.03]))
    frame = align_time_domain(queue, Scan.empty("v", 0.5, 0.6))
    assert len(frame) == 0
    assert len(queue) == 0
    assert queue.dropped == 3


def test_out_of_order_push():
    queue = AlignmentQueue()
    queue.push(make_h_scan([0.2, 0.3]))
    with pytest.raises(QueueOrderError):
        queue.push(make_h_scan([0.1, 0.25]))


def test_simulated_streams_share_time_domain(stationary_sweeps):
    queue = AlignmentQueue()
    h_sweeps = stationary_sweeps["h"]
    all_h = np.concatenate([s.t for s in h_sweeps])
    pending = list(h_sweeps)
    for v_scan in stationary_sweeps["v"]:
        while pending and pending[0].t_start < v_scan.t_end:
            queue.push(pending.pop(0))
        before = len(queue)
        frame = align_time_domain(queue, v_scan)
        assert len(queue) <= before
        inside = all_h[(all_h >= v_scan.t_start) & (all_h <= v_scan.t_end)]
        assert np.all(frame.t >= v_scan.t_start) and np.all(frame.t <= v_scan.t_end)
        assert np.array_equal(np.sort(frame.t), np.sort(inside))
    assert queue.conserved()


def test_timestamp_synthesis(stationary_sweeps):
    scan = stationary_sweeps["v"][2]
    bare = scan.with_times(np.full(len(scan), np.nan))
    timed = synthesize_timestamps(bare)
    assert timed.has_point_times
    assert np.all(timed.t >= scan.t_start) and np.all(timed.t < scan.t_end)
    # the simulated sweep turns at a constant rate
    assert np.allclose(timed.t, scan.t, atol=scan.duration / 100.0)
