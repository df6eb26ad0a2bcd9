# mmlio/posegraph/loop.py
"""ICP-verified loop closure between keyframes."""

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial import cKDTree

from mmlio.errors import ConvergenceError
from mmlio.geom import Pose
from mmlio.posegraph.graph import LOOP, GraphEdge, default_information

logger = logging.getLogger(__name__)


class LoopParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    search_radius: float = Field(3.0, gt=0, description="m")
    min_gap: int = Field(10, ge=1, description="keyframes between candidate and current")
    max_fitness: float = Field(0.05, gt=0, description="m^2")
    min_inliers: int = Field(100, ge=3)
    max_corr_dist: float = Field(1.0, gt=0, description="m")
    max_iter: int = Field(30, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    info_rot: float = Field(1e4, gt=0)
    info_trans: float = Field(1e2, gt=0)


def kabsch(src, dst):
    """Rigid transform minimizing Σ|R src + t - dst|²."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    U, _, Vt = np.linalg.svd((src - mu_s).T @ (dst - mu_d))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = mu_d - R @ mu_s
    return Pose.from_matrix(T)


def icp_align(source, target, init=None, params=None):
    """
    Point-to-point ICP. Returns (T mapping source onto target, fitness as
    mean squared inlier distance in m², inlier count).
    """
    params = params or LoopParams()
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    tree = cKDTree(target)
    T = Pose.identity() if init is None else init
    for it in range(1, params.max_iter + 1):
        moved = T.apply(source)
        dist, idx = tree.query(moved, k=1, distance_upper_bound=params.max_corr_dist)
        valid = np.isfinite(dist)
        if valid.sum() < 3:
            raise ConvergenceError(f"ICP lost correspondences at iteration {it}",
                                   last_iterate=T)
        step = kabsch(moved[valid], target[idx[valid]])
        T = step.compose(T)
        if np.linalg.norm(step.rotation.log()) + np.linalg.norm(step.translation) \
                < params.tolerance:
            break
    dist, _ = tree.query(T.apply(source), k=1, distance_upper_bound=params.max_corr_dist)
    inliers = dist[np.isfinite(dist)]
    fitness = float(np.mean(inliers ** 2)) if inliers.size else float("inf")
    return T, fitness, int(inliers.size)


def detect_loop(graph, kf_id, pose, cloud, params=None):
    """
    Loop edge from an earlier keyframe to `kf_id`, or None. Candidates are
    nodes at least `min_gap` keyframes back and within `search_radius` of
    `pose`, tried nearest first; the first one ICP accepts wins.
    """
    params = params or LoopParams()
    ids = list(graph.nodes)
    position = ids.index(kf_id) if kf_id in graph.nodes else len(ids)
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    candidates = []
    for n in ids[:max(position - params.min_gap, 0)]:
        d = graph.nodes[n].distance_to(pose)
        if d <= params.search_radius and n in graph.clouds:
            candidates.append((d, n))
    for d, n in sorted(candidates, key=lambda c: (c[0], ids.index(c[1]))):
        init = graph.nodes[n].between(pose)
        try:
            T, fitness, inliers = icp_align(cloud, graph.clouds[n], init, params)
        except ConvergenceError as exc:
            logger.debug(f"Loop candidate {n} rejected: {exc}")
            continue
        if fitness < params.max_fitness and inliers >= params.min_inliers:
            logger.info(f"Loop closure {n} -> {kf_id}: fitness={fitness:.4f} m^2, "
                        f"{inliers} inliers, correction {init.distance_to(T):.3f} m")
            return GraphEdge(n, kf_id, T, default_information(params.info_rot,
                                                              params.info_trans), LOOP)
        logger.debug(f"Loop candidate {n} rejected: fitness={fitness:.4f} inliers={inliers}")
    return None
