# mmlio/pipeline/metrics.py
"""Trajectory error metrics against ground truth."""

import logging

import numpy as np
from pydantic import BaseModel

from mmlio.errors import EvaluationError
from mmlio.geom import Pose

logger = logging.getLogger(__name__)


class Metrics(BaseModel):
    end_to_end_error_m: float
    ate_rmse_m: float
    pairs: int
    path_length_m: float


def _as_rows(traj, what):
    rows = np.asarray(traj, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != 8:
        raise EvaluationError(f"{what} must have rows t,px,py,pz,qw,qx,qy,qz")
    if len(rows) == 0:
        raise EvaluationError(f"{what} is empty")
    return rows


def associate(t_est, t_gt, max_dt=0.01):
    """(est index, gt index) pairs joining each estimate to the nearest truth within max_dt."""
    t_est = np.asarray(t_est, dtype=np.float64)
    t_gt = np.asarray(t_gt, dtype=np.float64)
    j = np.clip(np.searchsorted(t_gt, t_est), 1, len(t_gt) - 1) if len(t_gt) > 1 \
        else np.zeros(len(t_est), dtype=np.int64)
    if len(t_gt) > 1:
        left_closer = np.abs(t_est - t_gt[j - 1]) <= np.abs(t_gt[j] - t_est)
        j = np.where(left_closer, j - 1, j)
    ok = np.abs(t_gt[j] - t_est) <= max_dt
    return np.flatnonzero(ok), j[ok]


def evaluate(traj, ground_truth, max_dt=0.01):
    """
    End-to-end and absolute trajectory error. The estimate is aligned to the
    truth by the SE(3) transform matching their first associated poses.
    """
    est = _as_rows(traj, "trajectory")
    gt = _as_rows(ground_truth, "ground truth")
    i, j = associate(est[:, 0], gt[:, 0], max_dt)
    if len(i) == 0:
        raise EvaluationError(f"no estimate lies within {max_dt * 1e3:.0f} ms of a "
                              f"ground-truth sample")
    est_poses = [Pose.from_record(r) for r in est[i, 1:]]
    gt_pos = gt[j, 1:4]
    align = Pose.from_record(gt[j[0], 1:]).compose(est_poses[0].inverse())
    aligned = np.array([align.apply(P.translation) for P in est_poses])
    ate = float(np.sqrt(np.mean(np.sum((aligned - gt_pos) ** 2, axis=1))))
    closure = align.R @ (est_poses[-1].translation - est_poses[0].translation)
    e2e = float(np.linalg.norm(closure - (gt_pos[-1] - gt_pos[0])))
    length = float(np.sum(np.linalg.norm(np.diff(gt_pos, axis=0), axis=1)))
    logger.info(f"Evaluated {len(i)} poses: end-to-end {e2e:.4f} m, ATE {ate:.4f} m "
                f"over {length:.1f} m")
    return Metrics(end_to_end_error_m=e2e, ate_rmse_m=ate, pairs=int(len(i)),
                   path_length_m=length)
