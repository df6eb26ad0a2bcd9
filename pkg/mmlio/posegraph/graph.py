# mmlio/posegraph/graph.py
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mmlio.errors import DisconnectedGraphError, DuplicateNodeError, RangeError

logger = logging.getLogger(__name__)

ODOMETRY = "odometry"
LOOP = "loop"


class GraphParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iter: int = Field(20, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    odom_info_rot: float = Field(1e4, gt=0)
    odom_info_trans: float = Field(1e2, gt=0)


def default_information(rot=1e4, trans=1e2):
    """6x6 information in (rotation, translation) order."""
    return np.diag([rot] * 3 + [trans] * 3).astype(np.float64)


@dataclass(frozen=True, eq=False)
class GraphEdge:
    i: int
    j: int
    measurement: object
    information: np.ndarray
    kind: str = ODOMETRY


class PoseGraph:
    """Keyframe poses joined by odometry and loop constraints; the first node is the gauge."""

    def __init__(self):
        self.nodes = {}
        self.edges = []
        self.clouds = {}

    def __len__(self):
        return len(self.nodes)

    @property
    def root(self):
        return next(iter(self.nodes)) if self.nodes else None

    def add_node(self, node_id, pose, cloud=None):
        if node_id in self.nodes:
            raise DuplicateNodeError(node_id)
        self.nodes[node_id] = pose
        if cloud is not None:
            self.clouds[node_id] = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
        return self

    def add_edge(self, i, j, measurement, information=None, kind=ODOMETRY):
        for n in (i, j):
            if n not in self.nodes:
                raise KeyError(f"edge references unknown node {n}")
        info = default_information() if information is None \
            else np.asarray(information, dtype=np.float64)
        if info.shape != (6, 6) or not np.allclose(info, info.T) \
                or np.linalg.eigvalsh(0.5 * (info + info.T))[0] < -1e-9:
            raise RangeError(f"edge {i}->{j} information must be a symmetric PSD 6x6 matrix")
        self.edges.append(GraphEdge(i, j, measurement, 0.5 * (info + info.T), kind))
        return self

    def loop_edges(self):
        return [e for e in self.edges if e.kind == LOOP]

    def orphans(self):
        """Nodes that no chain of edges connects to the root."""
        if not self.nodes:
            return []
        adjacency = {n: [] for n in self.nodes}
        for e in self.edges:
            adjacency[e.i].append(e.j)
            adjacency[e.j].append(e.i)
        seen = {self.root}
        todo = deque([self.root])
        while todo:
            for m in adjacency[todo.popleft()]:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return [n for n in self.nodes if n not in seen]

    def check_connected(self):
        orphans = self.orphans()
        if orphans:
            raise DisconnectedGraphError(orphans)

    def with_poses(self, poses):
        """Copy of the graph with node poses replaced."""
        out = PoseGraph()
        out.nodes = {n: poses.get(n, p) for n, p in self.nodes.items()}
        out.edges = list(self.edges)
        out.clouds = dict(self.clouds)
        return out


def add_keyframe_node(graph, kf_id, state, information=None, cloud=None):
    """
    Add the optimized keyframe pose and, from the second node on, the odometry
    edge from the previously added node.
    """
    previous = next(reversed(graph.nodes)) if graph.nodes else None
    pose = state.pose if hasattr(state, "pose") else state
    graph.add_node(kf_id, pose, cloud)
    if previous is not None:
        rel = graph.nodes[previous].between(pose)
        graph.add_edge(previous, kf_id, rel, information, ODOMETRY)
    logger.debug(f"Pose graph node {kf_id}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    return graph
