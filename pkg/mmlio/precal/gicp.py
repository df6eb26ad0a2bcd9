# mmlio/precal/gicp.py
"""
Generalized ICP (plane-to-plane) between two point clouds.

Each point gets a covariance from its k nearest neighbours with eigenvalues
replaced by (ε, 1, 1), so surfaces act as planes. The transform is refined by
Gauss-Newton on SE(3) with the right perturbation R·Exp(δθ), t + δt, and
correspondences are re-associated every iteration.
"""

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial import cKDTree

from mmlio.errors import ConvergenceError, InsufficientPointsError
from mmlio.features.cloud import voxel_reduce
from mmlio.geom import Pose

logger = logging.getLogger(__name__)


class GicpParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k_neighbors: int = Field(20, ge=3)
    epsilon: float = Field(1e-3, gt=0)
    max_corr_dist: float = Field(1.0, gt=0, description="m")
    max_iter: int = Field(50, ge=1)
    tolerance: float = Field(1e-6, gt=0)
    min_points: int = Field(50, ge=3)
    voxel: float = Field(0.0, ge=0, description="m, 0 disables pre-downsampling")


def _batch_skew(v):
    K = np.zeros((len(v), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -v[:, 2], v[:, 1]
    K[:, 1, 0], K[:, 1, 2] = v[:, 2], -v[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -v[:, 1], v[:, 0]
    return K


def point_covariances(points, k, epsilon, tree=None):
    """Regularized (N, 3, 3) covariances from the k nearest neighbours."""
    tree = cKDTree(points) if tree is None else tree
    k = min(k, len(points))
    _, idx = tree.query(points, k=k)
    nbrs = points[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, U = np.linalg.eigh(cov)
    # eigh sorts ascending: the smallest direction is the surface normal
    D = np.array([epsilon, 1.0, 1.0])
    return np.einsum("nij,j,nkj->nik", U, D, U)


def gicp_align(source, target, init=None, params=None):
    """
    Transform T mapping source onto target and the fitness (mean squared
    correspondence distance, m²).
    """
    params = params or GicpParams()
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if params.voxel > 0.0:
        source = voxel_reduce(source, params.voxel)[0]
        target = voxel_reduce(target, params.voxel)[0]
    for what, cloud in (("source", source), ("target", target)):
        if len(cloud) < params.min_points:
            raise InsufficientPointsError(len(cloud), params.min_points, what)

    src_tree = cKDTree(source)
    tgt_tree = cKDTree(target)
    C_src = point_covariances(source, params.k_neighbors, params.epsilon, src_tree)
    C_tgt = point_covariances(target, params.k_neighbors, params.epsilon, tgt_tree)
    S_src = _batch_skew(source)

    T = Pose.identity() if init is None else init
    converged = False
    for it in range(1, params.max_iter + 1):
        R = T.R
        moved = source @ R.T + T.translation
        dist, idx = tgt_tree.query(moved, k=1, distance_upper_bound=params.max_corr_dist)
        valid = np.isfinite(dist)
        n_corr = int(valid.sum())
        if n_corr < 6:
            raise ConvergenceError(
                f"GICP found {n_corr} correspondences within {params.max_corr_dist} m "
                f"at iteration {it}", last_iterate=T)
        j = idx[valid]
        d = target[j] - moved[valid]
        M = np.linalg.inv(C_tgt[j] + R @ C_src[valid] @ R.T)

        J = np.empty((n_corr, 3, 6))
        J[:, :, :3] = R @ S_src[valid]
        J[:, :, 3:] = -np.eye(3)
        JtM = np.einsum("nki,nkl->nil", J, M)
        H = np.einsum("nil,nlj->ij", JtM, J)
        g = np.einsum("nil,nl->i", JtM, d)
        H += np.eye(6) * 1e-9 * max(np.trace(H), 1.0)
        delta = -np.linalg.solve(H, g)
        T = T.retract(delta)
        logger.debug(f"GICP iter {it}: {n_corr} corr, |delta|={np.linalg.norm(delta):.3e}")
        if np.linalg.norm(delta) < params.tolerance:
            converged = True
            break

    moved = source @ T.R.T + T.translation
    dist, _ = tgt_tree.query(moved, k=1, distance_upper_bound=params.max_corr_dist)
    inliers = dist[np.isfinite(dist)]
    fitness = float(np.mean(inliers ** 2)) if inliers.size else float("inf")
    if not converged:
        logger.warning(f"GICP stopped after {params.max_iter} iterations without converging")
    logger.info(f"GICP finished after {it} iterations: fitness={fitness:.3e} m^2, "
                f"{inliers.size}/{len(source)} inliers")
    return T, fitness
