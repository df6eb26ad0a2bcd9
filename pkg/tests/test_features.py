# tests/test_features.py
import math

import numpy as np
import pytest

from mmlio.errors import FrameMismatchError, RangeError
from mmlio.features import (
    EDGE_BREAK, FRAME_IMU, FRAME_SOLID_STATE, FRAME_SPINNING, LABEL_BREAK, LABEL_CORNER,
    LABEL_PLANE, FeatureCloud, FeatureParams, classify_points, detect_bad_frame,
    extract_features, mark_continuity, merge_features, organize_scan, ring_from_elevation,
    voxel_downsample,
)
from mmlio.features.classify import support_eigenvalues
from mmlio.geom import Pose, Quaternion
from mmlio.precal import ExtrinsicSet
from mmlio.scan import Scan
from mmlio.simkit import World, simulate_scan, stationary, wall

AT_ORIGIN = stationary(Pose.identity(), 0.0, 1.0)


def sweep(world, model):
    return simulate_scan(world, model, AT_ORIGIN, 0.0)


def ring_points(scan, ring_id):
    rings = organize_scan(scan)
    return scan.xyz[rings.rings[ring_id]]


@pytest.fixture(scope='module')
def doorway_scan(spinning_model):
    """Near wall at x = 2 with a 1 m gap, far wall at x = 6 behind it."""
    world = World([
        wall((2.0, -5.0), (2.0, 0.5), -3.0, 3.0),
        wall((2.0, 1.5), (2.0, 5.0), -3.0, 3.0),
        wall((6.0, -20.0), (6.0, 20.0), -3.0, 3.0),
    ])
    return sweep(world, spinning_model)


@pytest.fixture(scope='module')
def corner_scan(spinning_model):
    """Two walls meeting at 90 degrees along the vertical line x = y = 3."""
    world = World([wall((3.0, -10.0), (3.0, 3.0), -3.0, 3.0),
                   wall((3.0, 3.0), (-10.0, 3.0), -3.0, 3.0)])
    return sweep(world, spinning_model)


# --- organize_scan ---

def test_organize_simulated_sweep(room_world, spinning_model):
    scan = simulate_scan(room_world, spinning_model,
                         stationary(Pose.from_translation([0, 0, 1.5]), 0.0, 1.0), 0.0)
    rings = organize_scan(scan)
    assert rings.non_empty() == 16
    assert sum(rings.counts()) == len(scan)
    assert sorted(np.concatenate(rings.rings).tolist()) == list(range(len(scan)))
    for ring in rings.rings:
        assert np.all(np.diff(scan.t[ring]) >= 0.0)


def test_organize_empty_scan():
    assert len(organize_scan(Scan.empty("v", 0.0, 0.1))) == 0


def test_rings_from_elevation():
    el = np.radians([-15.0, 0.0, 15.0])
    xyz = np.column_stack([np.cos(el), np.zeros(3), np.sin(el)])
    ring, outside = ring_from_elevation(xyz)
    assert ring[0] == 0 and ring[1] in (7, 8) and ring[2] == 15
    assert not outside.any()


def test_elevation_outside_span_is_clamped():
    el = np.radians([-40.0, 40.0])
    xyz = np.column_stack([np.cos(el), np.zeros(2), np.sin(el)])
    scan = Scan("v", 0.0, 0.1, [0.01, 0.02], xyz, [0, 0])
    rings = organize_scan(scan, use_ring_ids=False)
    assert rings.out_of_span == 2
    assert rings.counts()[0] == 1 and rings.counts()[15] == 1


# --- mark_continuity ---

def test_constant_depth_is_continuous():
    az = np.radians(np.arange(0.0, 90.0, 1.0))
    ring = 3.0 * np.column_stack([np.cos(az), np.sin(az), np.zeros_like(az)])
    assert mark_continuity(ring, 0.3).all()


def test_single_depth_jump():
    depth = np.array([2.0, 2.0, 2.0, 3.0, 3.0, 3.0])
    ring = np.column_stack([depth, np.zeros(6), np.zeros(6)])
    cont = mark_continuity(ring, 0.3)
    assert cont.tolist() == [True, True, False, False, True, True]


def test_doorway_discontinuities_match_geometry(doorway_scan):
    ring = ring_points(doorway_scan, 8)
    cont = mark_continuity(ring, 0.3)
    near = ring[:, 0] < 4.0
    changed = np.zeros(len(ring), dtype=bool)
    changed[1:] |= near[1:] != near[:-1]
    changed[:-1] |= near[1:] != near[:-1]
    az = np.degrees(np.arctan2(ring[:, 1], ring[:, 0]))
    check = np.abs(az) < 55.0
    assert changed[check].sum() == 4
    assert np.array_equal(~cont[check], changed[check])


# --- classify_points ---

def test_collinear_window_is_not_plane():
    x = np.linspace(1.0, 3.0, 40)
    ring = np.column_stack([x, np.full(40, 2.0), np.zeros(40)])
    labels = classify_points(ring)
    assert not np.any(labels == LABEL_PLANE)


def test_wall_points_are_planes(spinning_model):
    scan = sweep(World([wall((3.0, -30.0), (3.0, 30.0), -5.0, 5.0)]), spinning_model)
    cloud = extract_features(scan)
    front = np.abs(scan.xyz[:, 1]) < scan.xyz[:, 0]
    planes_front = np.sum(np.abs(cloud.planes[:, 1]) < cloud.planes[:, 0])
    assert planes_front > 0.8 * front.sum()


def test_wall_junction_is_a_corner(corner_scan):
    rings_with_corner = 0
    for r in range(16):
        ring = ring_points(corner_scan, r)
        labels = classify_points(ring)
        corners = ring[labels == LABEL_CORNER]
        if len(corners) and np.min(np.hypot(corners[:, 0] - 3.0, corners[:, 1] - 3.0)) < 0.2:
            rings_with_corner += 1
    assert rings_with_corner >= 12


def test_breaks_keep_the_near_side(doorway_scan):
    ring = ring_points(doorway_scan, 8)
    labels = classify_points(ring)
    breaks = ring[labels == LABEL_BREAK]
    assert len(breaks) >= 2
    assert np.all(breaks[:, 0] < 4.0)


def test_classification_is_rigid_invariant(corner_scan):
    ring = ring_points(corner_scan, 5)
    T = Pose(Quaternion.from_rotvec([0.3, -0.2, 1.1]), [4.0, -2.0, 0.5])
    labels = classify_points(ring)
    moved = classify_points(T.apply(ring), origin=T.translation)
    assert np.array_equal(labels, moved)


def test_edges_are_corners_and_breaks(corner_scan):
    cloud = extract_features(corner_scan)
    support = support_eigenvalues(corner_scan.xyz, FeatureParams().support_k)
    corners = breaks = 0
    for ring in organize_scan(corner_scan).rings:
        labels = classify_points(corner_scan.xyz[ring], support_eigs=support[ring])
        corners += int(np.sum(labels == LABEL_CORNER))
        breaks += int(np.sum(labels == LABEL_BREAK))
    assert cloud.n_edges == corners + breaks
    assert int(np.sum(cloud.edge_kind == EDGE_BREAK)) == breaks
    assert cloud.n_edges + cloud.n_planes <= cloud.raw_count


def test_feature_params_are_validated():
    with pytest.raises(ValueError):
        FeatureParams(d_th=0.0)
    with pytest.raises(ValueError):
        FeatureParams(tau_e=-1)


# --- detect_bad_frame ---

def edge_cloud(n, distance=5.0):
    edges = np.column_stack([np.full(n, distance), np.linspace(-1, 1, n), np.zeros(n)])
    return FeatureCloud(FRAME_SOLID_STATE, edges, np.empty((0, 3)))


def test_bad_frame_threshold():
    assert detect_bad_frame(edge_cloud(99))
    assert not detect_bad_frame(edge_cloud(100))
    assert detect_bad_frame(edge_cloud(0))
    # near points do not count
    assert detect_bad_frame(edge_cloud(500, distance=1.0))


def test_bad_frame_needs_solid_state_frame():
    with pytest.raises(FrameMismatchError):
        detect_bad_frame(FeatureCloud.empty(FRAME_SPINNING))


def test_close_wall_frame_is_bad(close_wall_world, solid_state_model):
    scan = sweep(close_wall_world, solid_state_model)
    assert len(scan) > 1000
    cloud = extract_features(scan, "solid_state")
    assert cloud.n_edges < FeatureParams().tau_e
    assert detect_bad_frame(cloud)


# --- merge_features ---

def small_clouds():
    F_v = FeatureCloud(FRAME_SPINNING, [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    F_h = FeatureCloud(FRAME_SOLID_STATE, [[0.0, 0.0, 1.0]], [[0.0, 2.0, 0.0], [0.0, 3.0, 0.0]])
    return F_v, F_h


def test_merge_identity_is_union():
    F_v, F_h = small_clouds()
    merged = merge_features(F_v, F_h, ExtrinsicSet(Pose.identity(), Pose.identity()))
    assert merged.frame_id == FRAME_IMU
    assert merged.n_edges == 3 and merged.n_planes == 3


def test_merge_bad_frame_drops_solid_state():
    F_v, F_h = small_clouds()
    merged = merge_features(F_v, F_h, ExtrinsicSet(Pose.identity(), Pose.identity()), bad_h=True)
    assert len(merged) == len(F_v)


def test_merge_applies_extrinsic():
    F_v, F_h = small_clouds()
    extr = ExtrinsicSet(Pose.from_translation([0.1, 0.0, 0.0]), Pose.from_translation([-0.1, 0, 0]))
    merged = merge_features(F_v, F_h, extr)
    assert np.allclose(merged.edges[2], F_h.edges[0] + [0.1, 0.0, 0.0])
    assert np.allclose(merged.planes[1:], F_h.planes + [0.1, 0.0, 0.0])
    # v points chain through the solid-state frame back to where they were
    assert np.allclose(merged.edges[:2], F_v.edges)


def test_merge_checks_frames():
    F_v, F_h = small_clouds()
    with pytest.raises(FrameMismatchError):
        merge_features(F_h, F_v, ExtrinsicSet(Pose.identity(), Pose.identity()))


# --- voxel_downsample ---

def test_voxel_single_cell():
    cloud = FeatureCloud(FRAME_SPINNING, np.empty((0, 3)),
                         [[0.01, 0.01, 0.01], [0.03, 0.05, 0.02], [0.02, 0.03, 0.09]])
    out = voxel_downsample(cloud, 0.2)
    assert out.n_planes == 1
    assert np.allclose(out.planes[0], cloud.planes.mean(axis=0))


def test_voxel_grid_is_unchanged():
    g = np.arange(0.25, 5.0, 1.0)
    grid = np.array(np.meshgrid(g, g, g)).reshape(3, -1).T
    out = voxel_downsample(FeatureCloud(FRAME_SPINNING, grid, grid), 0.5)
    assert out.n_edges == len(grid) and out.n_planes == len(grid)


def test_voxel_count_matches_hashing():
    pts = np.random.default_rng(2).uniform(-10.0, 10.0, size=(20000, 3))
    out = voxel_downsample(FeatureCloud(FRAME_SPINNING, np.empty((0, 3)), pts), 0.2)
    occupied = {tuple(k) for k in np.floor(pts / 0.2).astype(int)}
    assert out.n_planes == len(occupied)
    with pytest.raises(RangeError):
        voxel_downsample(out, 0.0)
