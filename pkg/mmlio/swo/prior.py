# mmlio/swo/prior.py
import logging
from dataclasses import dataclass

import numpy as np

from mmlio.geom import STATE_DIM
from mmlio.swo.problem import WindowProblem

logger = logging.getLogger(__name__)

# Tangent-order standard deviations [rot, pos, vel, b_a, b_g]
ORIGIN_SIGMAS = (1e-6, 1e-6, 1e-2, 5e-2, 5e-3)


@dataclass(frozen=True, eq=False)
class MarginalPrior:
    """
    Quadratic prior dxᵀ H dx + 2 bᵀ dx on the retained keyframes, with
    dx = X ⊟ linpoint stacked in `kf_ids` order.
    """

    kf_ids: tuple
    linpoint: tuple
    H: np.ndarray
    b: np.ndarray
    damped: bool = False

    def __post_init__(self):
        n = STATE_DIM * len(self.kf_ids)
        if self.H.shape != (n, n) or self.b.shape != (n,):
            raise ValueError(f"prior blocks do not match {len(self.kf_ids)} states")

    @classmethod
    def anchor(cls, kf_id, state, sigmas=ORIGIN_SIGMAS):
        """Diagonal prior holding one state near its current value."""
        std = np.repeat(np.asarray(sigmas, dtype=np.float64), 3)
        return cls((kf_id,), (state,), np.diag(1.0 / std ** 2), np.zeros(STATE_DIM))

    def cost(self, dx):
        return float(dx @ self.H @ dx + 2.0 * self.b @ dx)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.H)[0])


def schur_marginalize(H, b, n_marg):
    """
    Eliminate the leading `n_marg` variables from (H, b). Returns the
    reduced (H, b) and whether the eliminated block needed damping. The
    reduced H is symmetrized and clipped to be positive semi-definite.
    """
    H = np.asarray(H, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = slice(0, n_marg)
    r = slice(n_marg, None)
    H_mm = 0.5 * (H[m, m] + H[m, m].T)
    damped = False
    try:
        L = np.linalg.cholesky(H_mm)
        H_mm_inv = np.linalg.inv(L).T @ np.linalg.inv(L)
    except np.linalg.LinAlgError:
        damped = True
        H_mm_inv = np.linalg.pinv(H_mm + 1e-9 * np.eye(n_marg), hermitian=True)
        logger.warning("Marginalized block is singular; using a damped inverse")
    H_rm = H[r, m]
    H_new = H[r, r] - H_rm @ H_mm_inv @ H[m, r]
    b_new = b[r] - H_rm @ H_mm_inv @ b[m]
    H_new = 0.5 * (H_new + H_new.T)
    evals, evecs = np.linalg.eigh(H_new)
    if evals[0] < 0.0:
        H_new = (evecs * np.maximum(evals, 0.0)) @ evecs.T
    return H_new, b_new, damped


def marginalize_oldest(window, prior=None, local_map=None, cfg=None, gravity=None):
    """
    Fold the oldest keyframe's IMU link, LiDAR terms and the current prior
    into a prior on the remaining keyframes at their current estimates.
    """
    if len(window) < 2:
        raise ValueError("marginalization needs at least two keyframes")
    problem = WindowProblem(window, local_map, prior, cfg, gravity)
    states = [kf.state for kf in window]
    if local_map is not None:
        problem.associate(states)
    H, g, _ = problem.linearize(states, only=0)
    H_r, b_r, damped = schur_marginalize(H, g, STATE_DIM)
    ids = tuple(kf.kf_id for kf in window[1:])
    logger.debug(f"Marginalized keyframe {window[0].kf_id}; prior now on {list(ids)}")
    return MarginalPrior(ids, tuple(states[1:]), H_r, b_r, damped)
