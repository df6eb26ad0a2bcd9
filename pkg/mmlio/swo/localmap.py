# mmlio/swo/localmap.py
"""
World-frame feature map built from the most recent keyframes.

Contributions are kept per keyframe so the oldest can be evicted and a
keyframe can be matched against everything except its own points. Indices
are rebuilt on every change.
"""

import logging
from collections import OrderedDict

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

EDGES = "edges"
PLANES = "planes"


class LocalFeatureMap:
    def __init__(self, capacity=20):
        self.capacity = capacity
        self._contributions = OrderedDict()
        self._rebuild()

    def __len__(self):
        return len(self.edges) + len(self.planes)

    @property
    def keyframe_ids(self):
        return list(self._contributions)

    def points(self, kind):
        return self.edges if kind == EDGES else self.planes

    def owners(self, kind):
        return self.edge_owner if kind == EDGES else self.plane_owner

    def insert(self, kf_id, edges_w, planes_w):
        """Add (or replace) the contribution of `kf_id`, evicting the oldest beyond capacity."""
        self._contributions.pop(kf_id, None)
        self._contributions[kf_id] = (np.asarray(edges_w, dtype=np.float64).reshape(-1, 3),
                                      np.asarray(planes_w, dtype=np.float64).reshape(-1, 3))
        while len(self._contributions) > self.capacity:
            evicted, _ = self._contributions.popitem(last=False)
            logger.debug(f"Local map evicted keyframe {evicted}")
        self._rebuild()
        return self

    def _rebuild(self):
        ids = list(self._contributions)
        parts = list(self._contributions.values())
        self.edges = np.concatenate([e for e, _ in parts]) if parts else np.empty((0, 3))
        self.planes = np.concatenate([p for _, p in parts]) if parts else np.empty((0, 3))
        self.edge_owner = np.concatenate(
            [np.full(len(e), i) for i, (e, _) in zip(ids, parts)]).astype(np.int64) \
            if parts else np.empty(0, np.int64)
        self.plane_owner = np.concatenate(
            [np.full(len(p), i) for i, (_, p) in zip(ids, parts)]).astype(np.int64) \
            if parts else np.empty(0, np.int64)
        self._trees = {}

    def _tree(self, kind, exclude):
        key = (kind, exclude)
        if key not in self._trees:
            pts = self.points(kind)
            keep = np.arange(len(pts)) if exclude is None \
                else np.flatnonzero(self.owners(kind) != exclude)
            tree = cKDTree(pts[keep]) if len(keep) else None
            self._trees[key] = (tree, keep)
        return self._trees[key]

    def query(self, kind, points, k, radius=np.inf, exclude=None):
        """
        k nearest map points of `kind` for each query point, skipping points
        owned by keyframe `exclude`. Returns (distances, indices into
        points(kind)); missing neighbours have distance inf and index -1.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        dist = np.full((len(points), k), np.inf)
        idx = np.full((len(points), k), -1, dtype=np.int64)
        tree, keep = self._tree(kind, exclude)
        if tree is None or len(points) == 0:
            return dist, idx
        d, j = tree.query(points, k=k, distance_upper_bound=radius)
        d = d.reshape(len(points), k)
        j = j.reshape(len(points), k)
        found = np.isfinite(d)
        dist[found] = d[found]
        idx[found] = keep[j[found]]
        return dist, idx


def update_local_map(local_map, kf, state, W=None):
    """Insert keyframe features at the optimized state; W overrides the capacity."""
    if W is not None:
        local_map.capacity = W
    pose = state.pose
    local_map.insert(kf.kf_id, pose.apply(kf.features.edges), pose.apply(kf.features.planes))
    logger.debug(f"Local map after keyframe {kf.kf_id}: {len(local_map.edges)} edges, "
                 f"{len(local_map.planes)} planes from {len(local_map.keyframe_ids)} keyframes")
    return local_map
