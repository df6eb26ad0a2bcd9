# mmlio/swo/residuals.py
"""
Residuals of the window optimizer with analytic Jacobians.

LiDAR terms depend on the pose part of one state only; their Jacobians are
taken w.r.t. [δθ, δt] with p_w = R·Exp(δθ)·p + t + δt. The IMU term links two
consecutive states and its Jacobian spans both 15-dim tangents
[δθ, δp, δv, δb_a, δb_g]. IMU residual rows are ordered (rot, vel, pos,
b_a, b_g), matching the preintegration covariance.
"""

import numpy as np

from mmlio.geom import BA, BG, POS, ROT, STATE_DIM, VEL, right_jacobian, right_jacobian_inv, skew, so3_exp
from mmlio.swo.config import SwoConfig
from mmlio.swo.localmap import EDGES, PLANES

R_ROT, R_VEL, R_POS, R_BA, R_BG = (slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12),
                                    slice(12, 15))


def _batch_skew(v):
    K = np.zeros((len(v), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -v[:, 2], v[:, 1]
    K[:, 1, 0], K[:, 1, 2] = v[:, 2], -v[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -v[:, 1], v[:, 0]
    return K


def point_jacobian(pose, p_i):
    """(n, 3, 6) derivative of the world point w.r.t. [δθ, δt]."""
    p_i = np.asarray(p_i, dtype=np.float64).reshape(-1, 3)
    J = np.empty((len(p_i), 3, 6))
    J[:, :, :3] = -pose.R @ _batch_skew(p_i)
    J[:, :, 3:] = np.eye(3)
    return J


# --- point-to-edge ---

def edge_terms(pose, p_i, a, b):
    """Distance of each transformed point to the line through a, b and its (n, 6) Jacobian."""
    p_i = np.asarray(p_i, dtype=np.float64).reshape(-1, 3)
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    p_w = pose.apply(p_i)
    length = np.linalg.norm(b - a, axis=1)
    c = np.cross(p_w - b, p_w - a)
    c_norm = np.linalg.norm(c, axis=1)
    r = c_norm / length
    unit = np.divide(c, c_norm[:, None], out=np.zeros_like(c), where=c_norm[:, None] > 0.0)
    dr_dp = np.einsum("ni,nij->nj", unit, _batch_skew(a - b)) / length[:, None]
    return r, np.einsum("nj,njk->nk", dr_dp, point_jacobian(pose, p_i))


def associate_edges(pose, p_i, local_map, cfg=None, exclude=None):
    """
    Two nearest map edges per point. Returns (indices of the associated
    points, a, b); points without two neighbours in range or with a
    degenerate line are skipped.
    """
    cfg = cfg or SwoConfig()
    p_i = np.asarray(p_i, dtype=np.float64).reshape(-1, 3)
    if len(p_i) == 0:
        return np.empty(0, np.int64), np.empty((0, 3)), np.empty((0, 3))
    _, idx = local_map.query(EDGES, pose.apply(p_i), cfg.edge_neighbors, cfg.corr_radius,
                             exclude)
    ok = np.all(idx >= 0, axis=1)
    sel = np.flatnonzero(ok)
    pts = local_map.edges
    a = pts[idx[sel, 0]]
    b = pts[idx[sel, 1]]
    good = np.linalg.norm(b - a, axis=1) >= 1e-6
    return sel[good], a[good], b[good]


def edge_residual(X, p_i, local_map, cfg=None, exclude=None):
    """Point-to-edge residual of one point, or None when no correspondence exists."""
    sel, a, b = associate_edges(X.pose, p_i, local_map, cfg, exclude)
    if len(sel) == 0:
        return None
    r, J = edge_terms(X.pose, np.reshape(p_i, (1, 3)), a, b)
    return float(r[0]), J[0]


# --- point-to-plane ---

def fit_planes(neighbors, tol=0.05):
    """
    Solve n·x + 1 = 0 over each (k, 3) neighbour set. Returns (n, ok); a
    fit is rejected when rank-deficient or when a neighbour lies farther
    than `tol` from it.
    """
    A = np.asarray(neighbors, dtype=np.float64)
    AtA = np.einsum("nki,nkj->nij", A, A)
    Atb = -A.sum(axis=1)
    ev = np.linalg.eigvalsh(AtA)
    ok = ev[:, 0] > 1e-12 * np.maximum(ev[:, 2], 1e-300)
    n = np.zeros((len(A), 3))
    if ok.any():
        n[ok] = np.linalg.solve(AtA[ok], Atb[ok][..., None])[..., 0]
    norm = np.linalg.norm(n, axis=1)
    spread = np.abs(np.einsum("nki,ni->nk", A, n) + 1.0) / np.maximum(norm, 1e-300)[:, None]
    ok &= np.all(spread <= tol, axis=1)
    return n, ok


def plane_terms(pose, p_i, n):
    """Unsigned Hesse distance |n·p_w + 1| / |n| and its (n, 6) Jacobian."""
    p_i = np.asarray(p_i, dtype=np.float64).reshape(-1, 3)
    n = np.asarray(n, dtype=np.float64).reshape(-1, 3)
    p_w = pose.apply(p_i)
    norm = np.linalg.norm(n, axis=1)
    s = np.einsum("ni,ni->n", n, p_w) + 1.0
    r = np.abs(s) / norm
    dr_dp = np.sign(s)[:, None] * n / norm[:, None]
    return r, np.einsum("nj,njk->nk", dr_dp, point_jacobian(pose, p_i))


def associate_planes(pose, p_i, local_map, cfg=None, exclude=None):
    """Plane fits from the nearest map plane points; returns (indices, normals)."""
    cfg = cfg or SwoConfig()
    p_i = np.asarray(p_i, dtype=np.float64).reshape(-1, 3)
    if len(p_i) == 0:
        return np.empty(0, np.int64), np.empty((0, 3))
    _, idx = local_map.query(PLANES, pose.apply(p_i), cfg.plane_neighbors, cfg.corr_radius,
                             exclude)
    sel = np.flatnonzero(np.all(idx >= 0, axis=1))
    if len(sel) == 0:
        return sel, np.empty((0, 3))
    n, ok = fit_planes(local_map.planes[idx[sel]], cfg.plane_fit_tol)
    return sel[ok], n[ok]


def plane_residual(X, p_i, local_map, cfg=None, exclude=None):
    """Point-to-plane residual of one point, or None when no valid plane fits."""
    sel, n = associate_planes(X.pose, p_i, local_map, cfg, exclude)
    if len(sel) == 0:
        return None
    r, J = plane_terms(X.pose, np.reshape(p_i, (1, 3)), n)
    return float(r[0]), J[0]


# --- robust loss ---

def huber_cost(r, delta):
    """Huber ρ on residual magnitudes, scaled to match r² inside the threshold."""
    a = np.abs(r)
    return np.where(a <= delta, a * a, 2.0 * delta * a - delta * delta)


def huber_weights(r, delta):
    a = np.abs(r)
    return np.where(a <= delta, 1.0, delta / np.maximum(a, 1e-300))


# --- IMU ---

def imu_sqrt_information(delta):
    """Upper factor L with Lᵀ L = Σ⁻¹ of the 15-dim preintegration residual."""
    info = np.linalg.inv(delta.covariance15())
    info = 0.5 * (info + info.T)
    return np.linalg.cholesky(info).T


def imu_residual(X_i, X_j, delta, g, whiten=False):
    """
    Preintegration residual between consecutive states and its (15, 30)
    Jacobian w.r.t. [tangent of X_i, tangent of X_j].
    """
    g = np.asarray(g, dtype=np.float64)
    dt = delta.dt_total
    dQ, dV, dP = delta.corrected(X_i.b_a, X_i.b_g)
    Ri = X_i.q.matrix
    Rj = X_j.q.matrix
    v_term = Ri.T @ (X_j.v - X_i.v - g * dt)
    p_term = Ri.T @ (X_j.p - X_i.p - X_i.v * dt - 0.5 * g * dt * dt)

    r = np.empty(15)
    r_R = (dQ.conjugate() * X_i.q.conjugate() * X_j.q).log()
    r[R_ROT] = r_R
    r[R_VEL] = v_term - dV
    r[R_POS] = p_term - dP
    r[R_BA] = X_j.b_a - X_i.b_a
    r[R_BG] = X_j.b_g - X_i.b_g

    J = np.zeros((15, 2 * STATE_DIM))
    Jr_inv = right_jacobian_inv(r_R)
    dbg = X_i.b_g - delta.bias_g
    i0, j0 = 0, STATE_DIM

    def cols(base, block):
        return slice(base + block.start, base + block.stop)

    J[R_ROT, cols(i0, ROT)] = -Jr_inv @ Rj.T @ Ri
    J[R_ROT, cols(j0, ROT)] = Jr_inv
    J[R_ROT, cols(i0, BG)] = (-Jr_inv @ so3_exp(r_R).T
                              @ right_jacobian(delta.J_R_bg @ dbg) @ delta.J_R_bg)

    J[R_VEL, cols(i0, ROT)] = skew(v_term)
    J[R_VEL, cols(i0, VEL)] = -Ri.T
    J[R_VEL, cols(j0, VEL)] = Ri.T
    J[R_VEL, cols(i0, BA)] = -delta.J_V_ba
    J[R_VEL, cols(i0, BG)] = -delta.J_V_bg

    J[R_POS, cols(i0, ROT)] = skew(p_term)
    J[R_POS, cols(i0, POS)] = -Ri.T
    J[R_POS, cols(j0, POS)] = Ri.T
    J[R_POS, cols(i0, VEL)] = -Ri.T * dt
    J[R_POS, cols(i0, BA)] = -delta.J_P_ba
    J[R_POS, cols(i0, BG)] = -delta.J_P_bg

    J[R_BA, cols(i0, BA)] = -np.eye(3)
    J[R_BA, cols(j0, BA)] = np.eye(3)
    J[R_BG, cols(i0, BG)] = -np.eye(3)
    J[R_BG, cols(j0, BG)] = np.eye(3)

    if whiten:
        L = imu_sqrt_information(delta)
        return L @ r, L @ J
    return r, J
