# mmlio/features/cloud.py
import logging
from dataclasses import dataclass

import numpy as np

from mmlio.errors import FrameMismatchError, RangeError

logger = logging.getLogger(__name__)

FRAME_SPINNING = "v"
FRAME_SOLID_STATE = "h"
FRAME_IMU = "i"
FRAME_WORLD = "w"

# edge sub-labels
EDGE_LINE = 0
EDGE_BREAK = 1


def _frozen(arr, dtype, tail=()):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if tail:
        arr = arr.reshape((-1,) + tail)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FeatureCloud:
    """Edge and plane points in the coordinate frame named by `frame_id`."""

    frame_id: str
    edges: np.ndarray
    planes: np.ndarray
    edge_kind: np.ndarray = None
    edge_t: np.ndarray = None
    plane_t: np.ndarray = None
    raw_count: int = 0

    def __post_init__(self):
        edges = _frozen(self.edges, np.float64, (3,))
        planes = _frozen(self.planes, np.float64, (3,))
        kind = np.zeros(len(edges), np.uint8) if self.edge_kind is None else self.edge_kind
        edge_t = np.zeros(len(edges)) if self.edge_t is None else self.edge_t
        plane_t = np.zeros(len(planes)) if self.plane_t is None else self.plane_t
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "planes", planes)
        object.__setattr__(self, "edge_kind", _frozen(kind, np.uint8))
        object.__setattr__(self, "edge_t", _frozen(edge_t, np.float64))
        object.__setattr__(self, "plane_t", _frozen(plane_t, np.float64))
        if len(self.edge_kind) != len(edges) or len(self.edge_t) != len(edges):
            raise ValueError("edge attributes must match the edge count")
        if len(self.plane_t) != len(planes):
            raise ValueError("plane timestamps must match the plane count")

    @classmethod
    def empty(cls, frame_id):
        return cls(frame_id, np.empty((0, 3)), np.empty((0, 3)))

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_planes(self):
        return len(self.planes)

    def __len__(self):
        return self.n_edges + self.n_planes

    def breaks(self):
        return self.edges[self.edge_kind == EDGE_BREAK]

    def lines(self):
        return self.edges[self.edge_kind == EDGE_LINE]

    def transformed(self, pose, frame_id):
        return FeatureCloud(frame_id, pose.apply(self.edges), pose.apply(self.planes),
                            self.edge_kind, self.edge_t, self.plane_t, self.raw_count)

    def subset(self, edge_mask, plane_mask):
        return FeatureCloud(self.frame_id, self.edges[edge_mask], self.planes[plane_mask],
                            self.edge_kind[edge_mask], self.edge_t[edge_mask],
                            self.plane_t[plane_mask], self.raw_count)


def concatenate(frame_id, clouds):
    clouds = [c for c in clouds if c is not None]
    if not clouds:
        return FeatureCloud.empty(frame_id)
    return FeatureCloud(
        frame_id,
        np.concatenate([c.edges for c in clouds]),
        np.concatenate([c.planes for c in clouds]),
        np.concatenate([c.edge_kind for c in clouds]),
        np.concatenate([c.edge_t for c in clouds]),
        np.concatenate([c.plane_t for c in clouds]),
        sum(c.raw_count for c in clouds),
    )


def merge_features(F_v, F_h, extr, bad_h=False):
    """
    Fused IMU-frame cloud T_v_to_i·F_v + T_h_to_i·F_h; the solid-state
    terms are left out for a bad frame. Either input may be None.
    """
    parts = []
    if F_v is not None:
        if F_v.frame_id != FRAME_SPINNING:
            raise FrameMismatchError(FRAME_SPINNING, F_v.frame_id)
        parts.append(F_v.transformed(extr.T_v_to_i, FRAME_IMU))
    if F_h is not None:
        if F_h.frame_id != FRAME_SOLID_STATE:
            raise FrameMismatchError(FRAME_SOLID_STATE, F_h.frame_id)
        if not bad_h:
            parts.append(F_h.transformed(extr.T_h_to_i, FRAME_IMU))
    return concatenate(FRAME_IMU, parts)


def voxel_reduce(points, leaf, t=None, kind=None):
    """Voxel centroids (with mean timestamps and first labels when given)."""
    if len(points) == 0:
        return points, t, kind
    keys = np.floor(points / leaf).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    counts = np.bincount(inverse).astype(np.float64)
    # keep the input order of first occurrence
    order = np.argsort(first, kind="stable")
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, points)
    t_mean = None if t is None else (np.bincount(inverse, weights=t) / counts)[order]
    return ((sums / counts[:, None])[order], t_mean,
            None if kind is None else kind[first][order])


def voxel_downsample(cloud, leaf):
    """One centroid per occupied voxel, edges and planes independently."""
    if leaf <= 0:
        raise RangeError(f"voxel leaf must be positive, got {leaf}")
    edges, edge_t, kind = voxel_reduce(cloud.edges, leaf, cloud.edge_t, cloud.edge_kind)
    planes, plane_t, _ = voxel_reduce(cloud.planes, leaf, cloud.plane_t)
    return FeatureCloud(cloud.frame_id, edges, planes, kind, edge_t, plane_t, cloud.raw_count)
