# mmlio/posegraph/optimize.py
"""
Gauss-Newton over the node poses with the root held fixed.

Edge residual (rotation first):
    e = [Log(R_ijᵀ R_iᵀ R_j), R_ijᵀ (R_iᵀ (t_j - t_i) - t_ij)]
Nodes are perturbed like Pose.retract: R·Exp(δθ), t + δt.
"""

import logging

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from mmlio.geom import right_jacobian_inv, skew
from mmlio.posegraph.graph import GraphParams

logger = logging.getLogger(__name__)


def edge_error(T_i, T_j, T_ij):
    R_i, R_j, R_ij = T_i.R, T_j.R, T_ij.R
    e = np.empty(6)
    e[:3] = (T_ij.rotation.conjugate() * T_i.rotation.conjugate() * T_j.rotation).log()
    e[3:] = R_ij.T @ (R_i.T @ (T_j.translation - T_i.translation) - T_ij.translation)
    return e


def edge_jacobians(T_i, T_j, T_ij, e):
    R_i, R_j, R_ij = T_i.R, T_j.R, T_ij.R
    Jr_inv = right_jacobian_inv(e[:3])
    A = np.zeros((6, 6))
    B = np.zeros((6, 6))
    A[:3, :3] = -Jr_inv @ R_j.T @ R_i
    B[:3, :3] = Jr_inv
    A[3:, :3] = R_ij.T @ skew(R_i.T @ (T_j.translation - T_i.translation))
    A[3:, 3:] = -R_ij.T @ R_i.T
    B[3:, 3:] = R_ij.T @ R_i.T
    return A, B


def graph_cost(graph, poses=None):
    poses = graph.nodes if poses is None else poses
    total = 0.0
    for edge in graph.edges:
        e = edge_error(poses[edge.i], poses[edge.j], edge.measurement)
        total += float(e @ edge.information @ e)
    return total


def _normal_equations(graph, poses, slot, n_free):
    rows, cols, vals = [], [], []
    g = np.zeros(6 * n_free)
    for edge in graph.edges:
        e = edge_error(poses[edge.i], poses[edge.j], edge.measurement)
        A, B = edge_jacobians(poses[edge.i], poses[edge.j], edge.measurement, e)
        blocks = [(slot.get(edge.i), A), (slot.get(edge.j), B)]
        for a, Ja in blocks:
            if a is None:
                continue
            g[6 * a:6 * a + 6] += Ja.T @ edge.information @ e
            for b, Jb in blocks:
                if b is None:
                    continue
                blk = Ja.T @ edge.information @ Jb
                r, c = np.meshgrid(np.arange(6) + 6 * a, np.arange(6) + 6 * b, indexing="ij")
                rows.append(r.ravel())
                cols.append(c.ravel())
                vals.append(blk.ravel())
    if rows:
        H = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows),
                               np.concatenate(cols))), shape=(6 * n_free, 6 * n_free)).tocsc()
    else:
        H = sparse.csc_matrix((6 * n_free, 6 * n_free))
    return H, g


def optimize_graph(graph, params=None):
    """Corrected node poses as {node id: Pose}; the root node is returned untouched."""
    params = params or GraphParams()
    graph.check_connected()
    poses = dict(graph.nodes)
    free = [n for n in graph.nodes if n != graph.root]
    if not free or not graph.edges:
        return poses
    slot = {n: k for k, n in enumerate(free)}
    cost = graph_cost(graph, poses)
    initial = cost
    for it in range(1, params.max_iter + 1):
        H, g = _normal_equations(graph, poses, slot, len(free))
        H = H + sparse.identity(H.shape[0], format="csc") * 1e-12
        delta = -spsolve(H, g)
        # halve until the cost does not increase
        for _ in range(20):
            trial = dict(poses)
            for n, k in slot.items():
                trial[n] = poses[n].retract(delta[6 * k:6 * k + 6])
            new_cost = graph_cost(graph, trial)
            if new_cost <= cost:
                break
            delta = 0.5 * delta
        else:
            logger.debug(f"Graph GN iteration {it}: no decreasing step")
            break
        poses, cost = trial, new_cost
        step = float(np.linalg.norm(delta))
        logger.debug(f"Graph GN iteration {it}: cost={cost:.6e} step={step:.3e}")
        if step < params.tolerance:
            break
    logger.info(f"Pose graph optimized: {len(graph.nodes)} nodes, {len(graph.edges)} edges, "
                f"cost {initial:.4e} -> {cost:.4e}")
    return poses
