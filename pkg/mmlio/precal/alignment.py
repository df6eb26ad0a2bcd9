# mmlio/precal/alignment.py
"""
Split-and-merge temporal alignment: solid-state points are queued by
timestamp and cut into frames that share each spinning sweep's interval.
"""

import logging
import math

import numpy as np

from mmlio.errors import QueueOrderError
from mmlio.scan import SENSOR_SOLID_STATE, Scan

logger = logging.getLogger(__name__)

# Points fired in the first column may round to just below its azimuth.
AZIMUTH_JITTER = 1e-6


def synthesize_timestamps(scan):
    """
    Per-point times for a spinning sweep without them, from the azimuth swept
    since the first point: t = t_start + duration · Δaz / 2π.
    """
    if len(scan) == 0 or scan.has_point_times:
        return scan
    az = np.arctan2(scan.xyz[:, 1], scan.xyz[:, 0])
    frac = np.mod(az - az[0] + AZIMUTH_JITTER, 2.0 * math.pi) / (2.0 * math.pi)
    return scan.with_times(scan.t_start + scan.duration * frac)


class AlignmentQueue:
    """Solid-state points ordered by timestamp (single writer, single reader)."""

    def __init__(self):
        self._t = np.empty(0)
        self._xyz = np.empty((0, 3))
        self._ring = np.empty(0, dtype=np.uint8)
        self.pushed = 0
        self.dropped = 0
        self.emitted = 0

    def __len__(self):
        return len(self._t)

    @property
    def timestamps(self):
        return self._t

    @property
    def front(self):
        return float(self._t[0]) if len(self._t) else None

    @property
    def back(self):
        return float(self._t[-1]) if len(self._t) else None

    def push(self, scan):
        if len(scan) == 0:
            return
        order = np.argsort(scan.t, kind="stable")
        t = scan.t[order]
        if np.isnan(t).any():
            raise QueueOrderError("solid-state points need timestamps to be queued")
        if len(self._t) and t[0] < self._t[-1]:
            raise QueueOrderError(
                f"out-of-order insertion: {t[0]:.6f} precedes queue back {self._t[-1]:.6f}")
        self._t = np.concatenate([self._t, t])
        self._xyz = np.concatenate([self._xyz, scan.xyz[order]])
        self._ring = np.concatenate([self._ring, scan.ring[order]])
        self.pushed += len(t)

    def conserved(self):
        """Every pushed point was dropped, emitted or is still queued, once."""
        return self.pushed == self.dropped + self.emitted + len(self)

    def drop_before(self, t):
        n = int(np.searchsorted(self._t, t, side="left"))
        self._t, self._xyz, self._ring = self._t[n:], self._xyz[n:], self._ring[n:]
        self.dropped += n
        return n

    def pop_through(self, t_end):
        cut = int(np.searchsorted(self._t, t_end, side="right"))
        out = self._t[:cut], self._xyz[:cut], self._ring[:cut]
        self._t, self._xyz, self._ring = self._t[cut:], self._xyz[cut:], self._ring[cut:]
        return out


def align_time_domain(queue, v_scan):
    """
    Solid-state frame holding exactly the queued points with t in
    [t_ms, t_me] of the spinning sweep. Earlier points are dropped, later
    ones stay queued.
    """
    t_ms, t_me = v_scan.t_start, v_scan.t_end
    n_drop = queue.drop_before(t_ms)
    t, xyz, ring = queue.pop_through(t_me)
    queue.emitted += len(t)
    logger.debug(f"Aligned {len(t)} solid-state points to [{t_ms:.4f}, {t_me:.4f}], "
                 f"dropped {n_drop}, {len(queue)} queued")
    return Scan(SENSOR_SOLID_STATE, t_ms, t_me, t, xyz, ring)
