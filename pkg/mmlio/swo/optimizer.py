# mmlio/swo/optimizer.py
"""Levenberg-Marquardt over the window states."""

import logging
from dataclasses import dataclass, field

import numpy as np

from mmlio.errors import DivergenceError
from mmlio.features.cloud import FeatureCloud, FRAME_IMU
from mmlio.geom import STATE_DIM
from mmlio.imu.preintegration import predict_state
from mmlio.swo.config import SwoConfig
from mmlio.swo.prior import MarginalPrior
from mmlio.swo.problem import Keyframe, WindowProblem

logger = logging.getLogger(__name__)

# Tangent-order standard deviations holding the previous frame during tracking
TRACKING_SIGMAS = (1e-3, 1e-3, 5e-2, 2e-2, 2e-3)

MAX_LAMBDA = 1e8


@dataclass
class WindowStats:
    iterations: int = 0
    outer: int = 0
    costs: list = field(default_factory=list)
    edges: int = 0
    planes: int = 0
    skipped_edges: int = 0
    skipped_planes: int = 0
    imu_only: bool = False
    converged: bool = False

    @property
    def initial_cost(self):
        return self.costs[0][0] if self.costs and self.costs[0] else float("nan")

    @property
    def final_cost(self):
        return self.costs[-1][-1] if self.costs and self.costs[-1] else float("nan")

    def as_dict(self):
        return dict(iterations=self.iterations, outer=self.outer, edges=self.edges,
                    planes=self.planes, skipped_edges=self.skipped_edges,
                    skipped_planes=self.skipped_planes, imu_only=self.imu_only,
                    converged=self.converged, initial_cost=self.initial_cost,
                    final_cost=self.final_cost)


def _check_states(states, cfg, dump):
    for k, X in enumerate(states):
        if not X.is_finite() or X.magnitude() > cfg.divergence_norm:
            raise DivergenceError(f"window state {k} diverged", dump)


def optimize_window(window, local_map, prior=None, cfg=None, gravity=None):
    """
    Jointly refine the states of `window` (list of Keyframe) against the
    local map, the IMU links and the marginalization prior. Returns the
    optimized NavStates and the iteration statistics.
    """
    cfg = cfg or SwoConfig()
    if len(window) > cfg.window_size:
        raise ValueError(f"window holds {len(window)} keyframes, limit {cfg.window_size}")
    problem = WindowProblem(window, local_map, prior, cfg, gravity)
    states = [kf.state for kf in window]
    stats = WindowStats()
    dump = []
    lam = cfg.lm_lambda

    for outer in range(cfg.max_outer):
        n_corr = problem.associate(states)
        if outer == 0 and n_corr < cfg.min_correspondences:
            stats.imu_only = True
            logger.warning(f"Window ending at keyframe {window[-1].kf_id} has {n_corr} "
                           f"LiDAR correspondences; keeping the IMU prediction")
            return states, stats
        stats.outer = outer + 1
        start = states
        H, g, cost = problem.linearize(states)
        costs = [cost]
        step = np.inf
        for _ in range(cfg.max_inner):
            stats.iterations += 1
            D = np.maximum(np.diag(H), 1e-9)
            try:
                delta = np.linalg.solve(H + lam * np.diag(D), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            candidate = [X.boxplus(delta[STATE_DIM * k:STATE_DIM * (k + 1)])
                         for k, X in enumerate(states)]
            new_cost = problem.cost(candidate)
            dump.append(dict(outer=outer, lam=lam, cost=cost, new_cost=new_cost,
                             step=float(np.linalg.norm(delta))))
            if not np.isfinite(new_cost):
                raise DivergenceError(f"cost became {new_cost} at LM iteration "
                                      f"{stats.iterations}", dump)
            if new_cost <= cost:
                _check_states(candidate, cfg, dump)
                states = candidate
                step = float(np.linalg.norm(delta))
                lam = max(lam / 10.0, 1e-12)
                H, g, cost = problem.linearize(states)
                costs.append(cost)
                logger.debug(f"LM {outer}.{len(costs) - 1}: cost={cost:.6e} step={step:.3e}")
                if step < cfg.param_tol:
                    break
            else:
                lam *= 10.0
                if lam > MAX_LAMBDA:
                    break
        stats.costs.append(costs)
        moved = max(float(np.linalg.norm(X.boxminus(X0))) for X, X0 in zip(states, start))
        if moved < cfg.param_tol:
            stats.converged = True
            break

    stats.edges = sum(len(a.edge_sel) for a in problem.assoc)
    stats.planes = sum(len(a.plane_sel) for a in problem.assoc)
    stats.skipped_edges, stats.skipped_planes = problem.skipped()
    return states, stats


def track_frame(prev_state, delta, features, local_map, cfg=None, gravity=None,
                sigmas=TRACKING_SIGMAS):
    """
    State at the end of `delta` for a non-keyframe: the IMU prediction from
    the previous frame refined against the local map, the previous state
    held by a tight prior.
    """
    g = np.array([0.0, 0.0, -9.81]) if gravity is None else gravity
    predicted = predict_state(prev_state, delta, g)
    window = [
        Keyframe(-1, delta.t_start, FeatureCloud.empty(FRAME_IMU), None, prev_state),
        Keyframe(-2, delta.t_end, features, delta, predicted),
    ]
    prior = MarginalPrior.anchor(-1, prev_state, sigmas)
    states, stats = optimize_window(window, local_map, prior, cfg, g)
    return states[1], stats
