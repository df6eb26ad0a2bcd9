# mmlio/scan.py
"""Scan: one LiDAR sweep with per-point timestamps and ring/line IDs."""

from dataclasses import dataclass

import numpy as np

SENSOR_SPINNING = "v"
SENSOR_SOLID_STATE = "h"


def _readonly(arr, dtype, shape_tail=()):
    arr = np.ascontiguousarray(arr, dtype=dtype)
    if arr.ndim == 1 and shape_tail:
        arr = arr.reshape((-1,) + shape_tail)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Scan:
    """
    Points of one sweep over [t_start, t_end), expressed in the sensor frame
    at their own emission time unless the scan has been undistorted.

    A timestamp of NaN means the driver did not provide per-point times.
    """

    sensor: str
    t_start: float
    t_end: float
    t: np.ndarray
    xyz: np.ndarray
    ring: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "t", _readonly(self.t, np.float64))
        object.__setattr__(self, "xyz", _readonly(self.xyz, np.float64, (3,)))
        object.__setattr__(self, "ring", _readonly(self.ring, np.uint8))
        if not (len(self.t) == len(self.xyz) == len(self.ring)):
            raise ValueError("scan arrays must have equal length")

    @classmethod
    def empty(cls, sensor, t_start, t_end):
        return cls(sensor, t_start, t_end, np.empty(0), np.empty((0, 3)), np.empty(0, np.uint8))

    def __len__(self):
        return len(self.t)

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def has_point_times(self):
        return len(self.t) > 0 and not np.all(np.isnan(self.t))

    def ranges(self):
        return np.linalg.norm(self.xyz, axis=1)

    def subset(self, mask):
        return Scan(self.sensor, self.t_start, self.t_end,
                    self.t[mask], self.xyz[mask], self.ring[mask])

    def with_points(self, xyz):
        return Scan(self.sensor, self.t_start, self.t_end, self.t, xyz, self.ring)

    def with_times(self, t):
        return Scan(self.sensor, self.t_start, self.t_end, t, self.xyz, self.ring)

    def same_points(self, other):
        """Bit-for-bit comparison of the point records."""
        return (len(self) == len(other)
                and np.array_equal(self.t, other.t, equal_nan=True)
                and np.array_equal(self.xyz, other.xyz)
                and np.array_equal(self.ring, other.ring))
