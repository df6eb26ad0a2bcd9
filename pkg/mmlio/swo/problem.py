# mmlio/swo/problem.py
"""Least-squares problem over the keyframes of one window."""

import logging
from dataclasses import dataclass

import numpy as np

from mmlio.features.cloud import FeatureCloud
from mmlio.geom import STATE_DIM
from mmlio.swo.config import SwoConfig
from mmlio.swo.residuals import (
    associate_edges, associate_planes, edge_terms, huber_cost, huber_weights,
    imu_residual, imu_sqrt_information, plane_terms,
)

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Keyframe:
    """
    Deskewed IMU-frame features at time `t`, the preintegration from the
    previous keyframe (None for the first) and the current state estimate.
    """

    kf_id: int
    t: float
    features: FeatureCloud
    delta: object
    state: object


@dataclass
class Association:
    edge_sel: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    plane_sel: np.ndarray
    plane_n: np.ndarray

    @property
    def count(self):
        return len(self.edge_sel) + len(self.plane_sel)


class WindowProblem:
    def __init__(self, keyframes, local_map, prior=None, cfg=None, gravity=None):
        self.keyframes = list(keyframes)
        self.local_map = local_map
        self.prior = prior
        self.cfg = cfg or SwoConfig()
        self.gravity = np.array([0.0, 0.0, -9.81]) if gravity is None \
            else np.asarray(gravity, dtype=np.float64)
        self.n = len(self.keyframes)
        self.dim = STATE_DIM * self.n
        self._imu_L = [None] + [imu_sqrt_information(kf.delta) for kf in self.keyframes[1:]]
        self.assoc = [None] * self.n
        ids = [kf.kf_id for kf in self.keyframes]
        self._slot = {kf_id: k for k, kf_id in enumerate(ids)}
        if prior is not None:
            missing = [i for i in prior.kf_ids if i not in self._slot]
            if missing:
                raise KeyError(f"prior references keyframes outside the window: {missing}")

    # --- association ---

    def associate(self, states):
        """Re-associate every keyframe at `states`; returns the correspondence count."""
        in_map = set(self.local_map.keyframe_ids)
        for k, (kf, X) in enumerate(zip(self.keyframes, states)):
            exclude = kf.kf_id if kf.kf_id in in_map else None
            pose = X.pose
            e_sel, a, b = associate_edges(pose, kf.features.edges, self.local_map, self.cfg,
                                          exclude)
            p_sel, n = associate_planes(pose, kf.features.planes, self.local_map, self.cfg,
                                        exclude)
            self.assoc[k] = Association(e_sel, a, b, p_sel, n)
        return self.correspondences()

    def correspondences(self):
        return sum(a.count for a in self.assoc if a is not None)

    def skipped(self):
        edges = sum(kf.features.n_edges - len(a.edge_sel)
                    for kf, a in zip(self.keyframes, self.assoc) if a is not None)
        planes = sum(kf.features.n_planes - len(a.plane_sel)
                     for kf, a in zip(self.keyframes, self.assoc) if a is not None)
        return edges, planes

    # --- evaluation ---

    def _lidar(self, k, X):
        a = self.assoc[k]
        kf = self.keyframes[k]
        if a is None or a.count == 0:
            return np.empty(0), np.empty((0, 6))
        r_e, J_e = edge_terms(X.pose, kf.features.edges[a.edge_sel], a.edge_a, a.edge_b)
        r_p, J_p = plane_terms(X.pose, kf.features.planes[a.plane_sel], a.plane_n)
        return np.concatenate([r_e, r_p]), np.concatenate([J_e, J_p])

    def _lidar_cost(self, r):
        rho = huber_cost(r, self.cfg.huber_delta) if self.cfg.robust else r * r
        return float(np.sum(rho)) / self.cfg.lidar_sigma ** 2

    def _prior_index(self):
        return np.concatenate([np.arange(STATE_DIM) + STATE_DIM * self._slot[i]
                               for i in self.prior.kf_ids])

    def _prior_dx(self, states):
        return np.concatenate([states[self._slot[i]].boxminus(lin)
                               for i, lin in zip(self.prior.kf_ids, self.prior.linpoint)])

    def cost(self, states):
        total = 0.0
        for k in range(self.n):
            r, _ = self._lidar(k, states[k])
            total += self._lidar_cost(r)
        for k in range(1, self.n):
            r, _ = imu_residual(states[k - 1], states[k], self.keyframes[k].delta, self.gravity)
            total += float(np.sum((self._imu_L[k] @ r) ** 2))
        if self.prior is not None:
            total += self.prior.cost(self._prior_dx(states))
        return total

    def linearize(self, states, only=None):
        """
        Normal equations (H, g, cost) at `states` with H = JᵀWJ and g = JᵀWr.
        With `only`, keep the terms that touch that window slot (plus the prior).
        """
        H = np.zeros((self.dim, self.dim))
        g = np.zeros(self.dim)
        cost = 0.0
        inv_var = 1.0 / self.cfg.lidar_sigma ** 2
        for k in range(self.n):
            if only is not None and k != only:
                continue
            r, J = self._lidar(k, states[k])
            if len(r) == 0:
                continue
            w = huber_weights(r, self.cfg.huber_delta) if self.cfg.robust else np.ones_like(r)
            blk = slice(STATE_DIM * k, STATE_DIM * k + 6)
            H[blk, blk] += inv_var * (J.T * w) @ J
            g[blk] += inv_var * J.T @ (w * r)
            cost += self._lidar_cost(r)
        for k in range(1, self.n):
            if only is not None and only not in (k - 1, k):
                continue
            r, J = imu_residual(states[k - 1], states[k], self.keyframes[k].delta, self.gravity)
            L = self._imu_L[k]
            r, J = L @ r, L @ J
            blk = slice(STATE_DIM * (k - 1), STATE_DIM * (k + 1))
            H[blk, blk] += J.T @ J
            g[blk] += J.T @ r
            cost += float(r @ r)
        if self.prior is not None:
            idx = self._prior_index()
            dx = self._prior_dx(states)
            H[np.ix_(idx, idx)] += self.prior.H
            g[idx] += self.prior.H @ dx + self.prior.b
            cost += self.prior.cost(dx)
        return 0.5 * (H + H.T), g, cost
