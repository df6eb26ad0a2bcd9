import math

import numpy as np
import pytest
from pydantic import ValidationError

from mmlio.errors import DatasetError, DisconnectedGraphError, DuplicateNodeError, RangeError
from mmlio.geom import NavState, Pose, Quaternion
from mmlio.posegraph import (
    LOOP, ODOMETRY, GraphParams, LoopParams, PoseGraph, add_keyframe_node, default_information,
    detect_loop, graph_cost, icp_align, optimize_graph, read_graph, write_graph,
)
from mmlio.posegraph.optimize import edge_error, edge_jacobians


def yaw(rad):
    return Quaternion.from_axis_angle([0, 0, 1], rad)


def square_truth(side=5, step=1.0):
    """Closed square walk; node 4*side coincides with node 0."""
    poses = [Pose.identity()]
    for k in range(4 * side):
        turn = yaw(math.pi / 2) if (k + 1) % side == 0 else Quaternion.identity()
        poses.append(poses[-1].compose(Pose(turn, [step, 0.0, 0.0])))
    return poses


def drifted_graph(truth, scale=1.01, yaw_bias=0.01):
    graph = PoseGraph()
    graph.add_node(0, truth[0])
    estimate = truth[0]
    for k in range(1, len(truth)):
        rel = truth[k - 1].between(truth[k])
        noisy = Pose(rel.rotation * yaw(yaw_bias), rel.translation * scale)
        estimate = estimate.compose(noisy)
        graph.add_node(k, estimate)
        graph.add_edge(k - 1, k, noisy)
    return graph


def room_surfaces(rng, n=3000):
    """Points on the walls, floor and ceiling of a 6x6x3 m room plus a pillar."""
    u = rng.uniform(size=(n, 3))
    face = rng.integers(0, 7, size=n)
    pts = np.empty((n, 3))
    x, y, z = 6.0 * u[:, 0] - 3.0, 6.0 * u[:, 1] - 3.0, 3.0 * u[:, 2]
    pts[:] = np.column_stack([x, y, z])
    pts[face == 0, 2] = 0.0
    pts[face == 1, 2] = 3.0
    pts[face == 2, 0] = -3.0
    pts[face == 3, 0] = 3.0
    pts[face == 4, 1] = -3.0
    pts[face == 5, 1] = 3.0
    pillar = face == 6
    pts[pillar, 0] = 1.0 + 0.5 * np.cos(2 * math.pi * u[pillar, 0])
    pts[pillar, 1] = -1.0 + 0.5 * np.sin(2 * math.pi * u[pillar, 0])
    return pts


# --- graph structure ---

def test_add_keyframe_node_links_consecutive_nodes():
    graph = PoseGraph()
    add_keyframe_node(graph, 3, NavState())
    add_keyframe_node(graph, 5, NavState(p=[1.0, 0.0, 0.0], q=yaw(0.2)))
    assert graph.root == 3
    assert len(graph.edges) == 1
    edge = graph.edges[0]
    assert (edge.i, edge.j, edge.kind) == (3, 5, ODOMETRY)
    assert np.allclose(edge.measurement.translation, [1.0, 0.0, 0.0])
    assert edge.measurement.rotation.rotation_equal(yaw(0.2))


def test_duplicate_node():
    graph = PoseGraph().add_node(0, Pose.identity())
    with pytest.raises(DuplicateNodeError) as exc:
        graph.add_node(0, Pose.identity())
    assert exc.value.node_id == 0
    assert isinstance(exc.value, KeyError)


def test_add_edge_validation():
    graph = PoseGraph().add_node(0, Pose.identity()).add_node(1, Pose.identity())
    with pytest.raises(KeyError):
        graph.add_edge(0, 9, Pose.identity())
    with pytest.raises(RangeError):
        graph.add_edge(0, 1, Pose.identity(), -np.eye(6))
    with pytest.raises(RangeError):
        graph.add_edge(0, 1, Pose.identity(), np.eye(3))


def test_disconnected_graph():
    graph = PoseGraph()
    for n in range(4):
        graph.add_node(n, Pose.from_translation([n, 0.0, 0.0]))
    graph.add_edge(0, 1, Pose.from_translation([1.0, 0.0, 0.0]))
    graph.add_edge(2, 3, Pose.from_translation([1.0, 0.0, 0.0]))
    assert graph.orphans() == [2, 3]
    with pytest.raises(DisconnectedGraphError) as exc:
        optimize_graph(graph)
    assert exc.value.orphans == [2, 3]


def test_graph_params_validation():
    with pytest.raises(ValidationError):
        GraphParams(max_iter=0)
    assert np.allclose(np.diag(default_information(4.0, 9.0)), [4, 4, 4, 9, 9, 9])


# --- optimization ---

def test_edge_jacobians_match_finite_difference():
    T_i = Pose(Quaternion.from_rotvec([0.1, 0.2, -0.3]), [1.0, 2.0, 0.5])
    T_j = Pose(Quaternion.from_rotvec([-0.2, 0.1, 0.6]), [2.0, 1.5, 0.7])
    T_ij = Pose(Quaternion.from_rotvec([0.0, 0.1, 0.8]), [1.1, -0.4, 0.1])
    A, B = edge_jacobians(T_i, T_j, T_ij, edge_error(T_i, T_j, T_ij))
    eps = 1e-6
    for k in range(6):
        step = np.zeros(6)
        step[k] = eps
        d_i = (edge_error(T_i.retract(step), T_j, T_ij)
               - edge_error(T_i.retract(-step), T_j, T_ij)) / (2 * eps)
        d_j = (edge_error(T_i, T_j.retract(step), T_ij)
               - edge_error(T_i, T_j.retract(-step), T_ij)) / (2 * eps)
        assert np.allclose(d_i, A[:, k], atol=1e-6)
        assert np.allclose(d_j, B[:, k], atol=1e-6)


def test_consistent_graph_is_a_fixed_point():
    truth = square_truth()
    graph = drifted_graph(truth, scale=1.0, yaw_bias=0.0)
    assert graph_cost(graph) == pytest.approx(0.0, abs=1e-12)
    poses = optimize_graph(graph)
    for n, pose in graph.nodes.items():
        assert poses[n].distance_to(pose) < 1e-9


def test_loop_edge_corrects_square_drift():
    truth = square_truth()
    graph = drifted_graph(truth)
    end = len(truth) - 1
    before = graph.nodes[end].distance_to(truth[end])
    graph.add_edge(0, end, Pose.identity(), np.diag([1e6] * 6), LOOP)
    cost_before = graph_cost(graph)
    poses = optimize_graph(graph)
    after = poses[end].distance_to(truth[end])
    assert before > 0.5
    assert after * 5.0 <= before
    assert poses[0] is graph.nodes[0]
    assert graph_cost(graph, poses) < cost_before


def test_single_node_graph():
    graph = PoseGraph().add_node(0, Pose.from_translation([1.0, 2.0, 3.0]))
    assert optimize_graph(graph) == graph.nodes


def test_with_poses_copies():
    graph = drifted_graph(square_truth(side=2))
    moved = graph.with_poses({1: Pose.identity()})
    assert moved.nodes[1].distance_to(Pose.identity()) == 0.0
    assert graph.nodes[1].distance_to(Pose.identity()) > 0.0
    assert len(moved.edges) == len(graph.edges)


# --- loop detection ---

def test_icp_align_recovers_offset(rng):
    target = room_surfaces(rng)
    offset = Pose(yaw(math.radians(1.0)), [0.05, -0.03, 0.02])
    source = offset.inverse().apply(target)
    T, fitness, inliers = icp_align(source, target)
    assert T.distance_to(offset) < 1e-3
    assert math.degrees(T.angle_to(offset)) < 0.05
    assert fitness < 1e-6
    assert inliers == len(source)


@pytest.fixture(scope='module')
def loop_graph():
    rng = np.random.default_rng(7)
    world = room_surfaces(rng)
    truth = [Pose(yaw(0.3 * k), [0.2 * k, 0.1 * k, 0.0]) for k in range(11)]
    truth.append(Pose(yaw(0.02), [0.1, -0.1, 0.0]))
    graph = PoseGraph()
    for k, pose in enumerate(truth[:-1]):
        add_keyframe_node(graph, k, pose, cloud=pose.inverse().apply(world))
    return graph, truth[-1], truth[-1].inverse().apply(world)


def test_detect_loop_finds_revisit(loop_graph):
    graph, true_pose, cloud = loop_graph
    estimate = true_pose.retract([0.0, 0.0, math.radians(1.0), 0.05, 0.04, 0.0])
    edge = detect_loop(graph, 11, estimate, cloud)
    assert edge is not None
    assert (edge.i, edge.j, edge.kind) == (0, 11, LOOP)
    expected = graph.nodes[0].between(true_pose)
    assert edge.measurement.distance_to(expected) < 1e-2
    assert math.degrees(edge.measurement.angle_to(expected)) < 0.2


def test_detect_loop_respects_gap_and_radius(loop_graph):
    graph, true_pose, cloud = loop_graph
    assert detect_loop(graph, 11, true_pose, cloud, LoopParams(min_gap=12)) is None
    far = Pose.from_translation([30.0, 0.0, 0.0])
    assert detect_loop(graph, 11, far, far.inverse().apply(cloud)) is None


# --- text export ---

def test_graph_file_round_trip(tmp_path):
    truth = square_truth(side=2)
    graph = drifted_graph(truth)
    end = len(truth) - 1
    graph.add_edge(0, end, Pose.identity(), np.diag([1e6] * 6), LOOP)
    path = tmp_path / "graph.txt"
    write_graph(graph, path)
    back = read_graph(path)
    assert list(back.nodes) == list(graph.nodes)
    for n in graph.nodes:
        assert back.nodes[n].distance_to(graph.nodes[n]) < 1e-12
    assert [(e.i, e.j, e.kind) for e in back.edges] == [(e.i, e.j, e.kind) for e in graph.edges]
    for a, b in zip(back.edges, graph.edges):
        assert np.allclose(a.information, b.information)
        assert a.measurement.distance_to(b.measurement) < 1e-12


def test_read_graph_rejects_bad_record(tmp_path):
    path = tmp_path / "graph.txt"
    path.write_text("NODE 0 0 0 0 1 0 0 0\nVERTEX 1 2 3\n")
    with pytest.raises(DatasetError) as exc:
        read_graph(path)
    assert exc.value.offset == "line 2"


IDENTITY_EDGE_INFO = " ".join(
    "1" if i == j else "0" for i in range(6) for j in range(i, 6))


@pytest.mark.parametrize('text, line', [
    ("NODE 0 0 0 0 1 0 0 0\nNODE 0 1 0 0 1 0 0 0\n", "line 2"),
    ("NODE 0 0 0 0 1 0 0 0\nNODE 1 1 0 0 1 0 0 0\n"
     f"EDGE 0 7 1 0 0 1 0 0 0 {IDENTITY_EDGE_INFO}\n", "line 3"),
])
def test_read_graph_reports_inconsistent_records(tmp_path, text, line):
    path = tmp_path / "graph.txt"
    path.write_text(text)
    with pytest.raises(DatasetError) as exc:
        read_graph(path)
    assert exc.value.offset == line


def test_read_graph_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        read_graph(tmp_path / "nope.txt")
