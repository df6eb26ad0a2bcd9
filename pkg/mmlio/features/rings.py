# mmlio/features/rings.py
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

SPINNING_CHANNELS = 16
CHANNEL_SPACING_DEG = 2.0
LOWEST_CHANNEL_DEG = -15.0


@dataclass(frozen=True, eq=False)
class RingSet:
    """Per-ring point indices into the source scan, each in timestamp order."""

    rings: list = field(default_factory=list)
    out_of_span: int = 0

    def __len__(self):
        return len(self.rings)

    def counts(self):
        return [len(r) for r in self.rings]

    def non_empty(self):
        return sum(1 for r in self.rings if len(r))


def ring_from_elevation(xyz, n_channels=SPINNING_CHANNELS, spacing_deg=CHANNEL_SPACING_DEG,
                        lowest_deg=LOWEST_CHANNEL_DEG):
    """
    Nearest channel for each point from its elevation angle. Returns
    (ring ids, mask of points outside the channel span by more than half a
    spacing; these are clamped to the boundary channel).
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    el = np.degrees(np.arctan2(xyz[:, 2], np.hypot(xyz[:, 0], xyz[:, 1])))
    pos = (el - lowest_deg) / spacing_deg
    ring = np.floor(pos + 0.5).astype(np.int64)
    outside = (ring < 0) | (ring > n_channels - 1)
    return np.clip(ring, 0, n_channels - 1), outside


def organize_scan(scan, model_kind="spinning", use_ring_ids=True, n_channels=SPINNING_CHANNELS):
    """
    Split a scan into rings: by stored ring/line ID, or for spinning scans
    without IDs by elevation bucket. Each ring is sorted by timestamp.
    """
    if len(scan) == 0:
        return RingSet([])
    out_of_span = 0
    if use_ring_ids:
        ids = scan.ring.astype(np.int64)
        n = int(ids.max()) + 1
    else:
        if model_kind != "spinning":
            raise ValueError("only spinning scans can be organized by elevation")
        ids, outside = ring_from_elevation(scan.xyz, n_channels)
        out_of_span = int(outside.sum())
        n = n_channels
        if out_of_span:
            logger.warning(f"{out_of_span} points outside the channel span were clamped "
                           f"to boundary rings")

    # NaN times (no per-point timestamps) keep their stored order
    t = np.nan_to_num(scan.t, nan=0.0)
    order = np.lexsort((np.arange(len(scan)), t, ids))
    sorted_ids = ids[order]
    bounds = np.searchsorted(sorted_ids, np.arange(n + 1))
    rings = [order[bounds[r]:bounds[r + 1]] for r in range(n)]
    return RingSet(rings, out_of_span)


def ring_depths(points, origin=None):
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=np.float64)
    return np.linalg.norm(np.asarray(points, dtype=np.float64) - origin, axis=1)


def depth_jumps(depth, d_th):
    """jump[i] is True when points i and i+1 differ in depth by d_th or more."""
    return np.abs(np.diff(depth)) >= d_th


def mark_continuity(ring, d_th, origin=None):
    """
    Boolean per point: continuous iff its depth differs by less than d_th from
    both ring neighbours (one neighbour at the ring ends).
    """
    depth = ring_depths(ring, origin)
    n = len(depth)
    if n == 0:
        return np.zeros(0, dtype=bool)
    jump = depth_jumps(depth, d_th)
    ok = np.ones(n, dtype=bool)
    ok[1:] &= ~jump
    ok[:-1] &= ~jump
    return ok

