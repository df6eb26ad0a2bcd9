# mmlio/features/classify.py
"""
Ring-based point classification into plane / corner / break points.

Windows run along a ring and never cross a depth jump. A point is a plane
point when its ring window is a smooth line and its neighbourhood in the
whole frame spreads in two dimensions; a corner when the two half-windows
bend by more than the corner angle (and the scan pattern itself does not
bend there); a break when it sits next to the near side of a depth jump.
"""

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial import cKDTree

from mmlio.features.cloud import EDGE_BREAK, EDGE_LINE, FeatureCloud
from mmlio.features.rings import depth_jumps, mark_continuity, organize_scan, ring_depths

logger = logging.getLogger(__name__)

LABEL_NONE = 0
LABEL_PLANE = 1
LABEL_CORNER = 2
LABEL_BREAK = 3


class FeatureParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_th: float = Field(0.3, gt=0, description="continuity depth threshold, m")
    k_neigh: int = Field(5, gt=0, description="window half-width along the ring")
    near_range: float = Field(2.0, gt=0, description="bad-frame near filter, m")
    tau_e: int = Field(100, gt=0, description="bad-frame edge count threshold")
    plane_ratio: float = Field(0.05, gt=0, description="min λ2/λ1 of the plane support")
    line_ratio: float = Field(0.1, gt=0, description="max λ2/λ1 of a smooth ring window")
    plane_residual: float = Field(0.02, gt=0, description="max RMS to the window line, m")
    corner_angle_deg: float = Field(30.0, gt=0, lt=180)
    segment_residual: float = Field(0.03, gt=0, description="max RMS of a corner side, m")
    min_segment: float = Field(0.1, gt=0, description="min extent of a corner side, m")
    pattern_guard_deg: float = Field(10.0, gt=0)
    support_k: int = Field(20, ge=3)
    voxel_leaf: float = Field(0.2, gt=0, description="feature downsampling leaf, m")


# --- windowed statistics ---

def _windows(seg, k, lo, hi):
    """Index grid for offsets lo..hi around every point, masked to its segment."""
    n = len(seg)
    offsets = np.arange(lo, hi + 1)
    idx = np.arange(n)[:, None] + offsets[None, :]
    inside = (idx >= 0) & (idx < n)
    idx = np.clip(idx, 0, n - 1)
    return idx, inside & (seg[idx] == seg[:, None])


def _scatter(P, mask):
    """Masked mean, ascending eigenvalues and eigenvectors of (n, w, 3) windows."""
    w = mask.astype(np.float64)
    count = np.maximum(w.sum(axis=1), 1.0)
    mean = (P * w[..., None]).sum(axis=1) / count[:, None]
    C = P - mean[:, None, :]
    cov = np.einsum("nk,nki,nkj->nij", w, C, C) / count[:, None, None]
    evals, evecs = np.linalg.eigh(cov)
    return mean, np.maximum(evals, 0.0), evecs, w.sum(axis=1).astype(int)


def _side_bend(P_l, m_l, P_r, m_r, center):
    """Bend angle (rad) between the left and right line fits at each center."""
    mean_l, ev_l, vec_l, n_l = _scatter(P_l, m_l)
    mean_r, ev_r, vec_r, n_r = _scatter(P_r, m_r)
    d_l = vec_l[:, :, 2]
    d_r = vec_r[:, :, 2]
    d_l = d_l * np.sign(np.einsum("ni,ni->n", d_l, center - mean_l))[:, None]
    d_r = d_r * np.sign(np.einsum("ni,ni->n", d_r, mean_r - center))[:, None]
    bend = np.arccos(np.clip(np.einsum("ni,ni->n", d_l, d_r), -1.0, 1.0))
    rms = np.maximum(np.sqrt(ev_l[:, 0] + ev_l[:, 1]), np.sqrt(ev_r[:, 0] + ev_r[:, 1]))
    ext_l = np.max(np.linalg.norm(P_l - center[:, None, :], axis=2) * m_l, axis=1)
    ext_r = np.max(np.linalg.norm(P_r - center[:, None, :], axis=2) * m_r, axis=1)
    return bend, rms, np.minimum(ext_l, ext_r), np.minimum(n_l, n_r)


def _pattern_bend(dirs, idx_l, m_l, idx_r, m_r):
    """Bend of the ray directions themselves, in the gnomonic plane of each point."""
    c = dirs[:, None, :]
    G_l = dirs[idx_l] / np.maximum(np.sum(dirs[idx_l] * c, axis=2), 1e-6)[..., None] - c
    G_r = dirs[idx_r] / np.maximum(np.sum(dirs[idx_r] * c, axis=2), 1e-6)[..., None] - c
    bend, _, _, _ = _side_bend(G_l, m_l, G_r, m_r, np.zeros_like(dirs))
    return bend


def classify_points(ring, continuity=None, params=None, origin=None, support_eigs=None):
    """
    Label every point of one ring (ordered by time) as LABEL_PLANE,
    LABEL_CORNER, LABEL_BREAK or LABEL_NONE.

    `support_eigs` holds ascending eigenvalues of each point's neighbourhood
    in the whole frame; without it the ring window itself is the support.
    """
    params = params or FeatureParams()
    ring = np.asarray(ring, dtype=np.float64).reshape(-1, 3)
    n = len(ring)
    labels = np.full(n, LABEL_NONE, dtype=np.uint8)
    if n < 3:
        return labels
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=np.float64)
    depth = ring_depths(ring, origin)
    if continuity is None:
        continuity = mark_continuity(ring, params.d_th, origin)
    jump = depth_jumps(depth, params.d_th)
    seg = np.concatenate([[0], np.cumsum(jump)])
    k = params.k_neigh

    # plane: smooth ring window + 2-D support
    idx, mask = _windows(seg, k, -k, k)
    _, ev, _, count = _scatter(ring[idx], mask)
    l1 = np.maximum(ev[:, 2], 1e-18)
    smooth = (count >= 3) & (ev[:, 1] / l1 < params.line_ratio) \
        & (np.sqrt(ev[:, 0] + ev[:, 1]) < params.plane_residual)
    sup = ev if support_eigs is None else np.asarray(support_eigs)
    planar = sup[:, 1] / np.maximum(sup[:, 2], 1e-18) > params.plane_ratio
    is_plane = continuity & smooth & planar

    # corner: two straight half-windows meeting at an angle
    idx_l, m_l = _windows(seg, k, -k, 0)
    idx_r, m_r = _windows(seg, k, 0, k)
    bend, rms, extent, n_side = _side_bend(ring[idx_l], m_l, ring[idx_r], m_r, ring)
    candidate = continuity & (n_side >= 3) & (rms < params.segment_residual) \
        & (extent >= params.min_segment) & (bend > math.radians(params.corner_angle_deg))
    if candidate.any():
        dirs = (ring - origin) / np.maximum(depth, 1e-12)[:, None]
        g_bend = _pattern_bend(dirs, idx_l, m_l, idx_r, m_r)
        candidate &= g_bend < math.radians(params.pattern_guard_deg)
        score = np.where(candidate, bend, -1.0)
        is_max = score >= np.max(np.where(mask, score[idx], -1.0), axis=1)
        is_corner = candidate & is_max
    else:
        is_corner = candidate

    # break: continuous neighbour of the near side of a depth jump
    disc = ~continuity
    is_break = np.zeros(n, dtype=bool)
    # neighbour j = i + 1 is discontinuous with its far side at j + 1
    j = np.arange(1, n - 1)
    near = disc[j] & jump[j] & (depth[j] < depth[j + 1])
    is_break[j - 1] |= near & continuity[j - 1]
    # neighbour j = i - 1 with its far side at j - 1
    near = disc[j] & jump[j - 1] & (depth[j] < depth[j - 1])
    is_break[j + 1] |= near & continuity[j + 1]

    labels[is_plane] = LABEL_PLANE
    labels[is_corner] = LABEL_CORNER
    labels[is_break] = LABEL_BREAK
    return labels


def support_eigenvalues(points, k):
    """Ascending scatter eigenvalues of every point's k nearest frame neighbours."""
    points = np.asarray(points, dtype=np.float64)
    k = min(k, len(points))
    _, idx = cKDTree(points).query(points, k=k)
    idx = idx.reshape(len(points), k)
    _, ev, _, _ = _scatter(points[idx], np.ones(idx.shape, dtype=bool))
    return ev


def extract_features(scan, model_kind="spinning", params=None, origin=None):
    """
    Organize, label and collect the edge and plane points of one scan. The
    result is in the scan's sensor frame, ordered by (ring, timestamp).
    """
    params = params or FeatureParams()
    if len(scan) == 0:
        return FeatureCloud.empty(scan.sensor)
    rings = organize_scan(scan, model_kind)
    support = support_eigenvalues(scan.xyz, params.support_k) if len(scan) >= 3 else None

    edge_idx, edge_kind, plane_idx = [], [], []
    counts = np.zeros(4, dtype=np.int64)
    for ring in rings.rings:
        if len(ring) < 3:
            continue
        pts = scan.xyz[ring]
        cont = mark_continuity(pts, params.d_th, origin)
        labels = classify_points(pts, cont, params, origin,
                                 None if support is None else support[ring])
        counts += np.bincount(labels, minlength=4)
        edge_mask = (labels == LABEL_CORNER) | (labels == LABEL_BREAK)
        edge_idx.append(ring[edge_mask])
        edge_kind.append(np.where(labels[edge_mask] == LABEL_BREAK, EDGE_BREAK, EDGE_LINE))
        plane_idx.append(ring[labels == LABEL_PLANE])

    def _cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.empty(0, dtype)

    e = _cat(edge_idx, np.int64)
    p = _cat(plane_idx, np.int64)
    cloud = FeatureCloud(scan.sensor, scan.xyz[e], scan.xyz[p], _cat(edge_kind, np.uint8),
                         scan.t[e], scan.t[p], raw_count=len(scan))
    logger.debug(f"Features {scan.sensor}@{scan.t_start:.3f}: {len(scan)} raw, "
                 f"{counts[LABEL_CORNER]} corner, {counts[LABEL_BREAK]} break, "
                 f"{counts[LABEL_PLANE]} plane")
    return cloud
