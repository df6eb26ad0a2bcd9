# mmlio/imu/measurements.py
from dataclasses import dataclass

import numpy as np

from mmlio.errors import RangeError


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: tuple
    accel: tuple


@dataclass(frozen=True, eq=False)
class ImuSeries:
    """Column-oriented IMU samples: t (N,), gyro (N, 3) rad/s, accel (N, 3) m/s²."""

    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        for name, shape in (("t", (-1,)), ("gyro", (-1, 3)), ("accel", (-1, 3))):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64).reshape(shape)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (len(self.t) == len(self.gyro) == len(self.accel)):
            raise ValueError("IMU columns must have equal length")

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty((0, 3)), np.empty((0, 3)))

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            return cls.empty()
        return cls(np.array([s.t for s in samples]),
                   np.array([s.gyro for s in samples], dtype=np.float64),
                   np.array([s.accel for s in samples], dtype=np.float64))

    @classmethod
    def coerce(cls, samples):
        return samples if isinstance(samples, ImuSeries) else cls.from_samples(samples)

    def __len__(self):
        return len(self.t)

    def samples(self):
        return [ImuSample(float(t), tuple(g), tuple(a))
                for t, g, a in zip(self.t, self.gyro, self.accel)]

    def slice_time(self, t0, t1):
        """Samples with t0 <= t <= t1, no interpolation."""
        lo = np.searchsorted(self.t, t0, side="left")
        hi = np.searchsorted(self.t, t1, side="right")
        return ImuSeries(self.t[lo:hi], self.gyro[lo:hi], self.accel[lo:hi])

    def _interp(self, t):
        g = np.array([np.interp(t, self.t, self.gyro[:, i]) for i in range(3)])
        a = np.array([np.interp(t, self.t, self.accel[:, i]) for i in range(3)])
        return g, a

    def window(self, t0, t1):
        """Samples covering exactly [t0, t1], linearly interpolated at both ends."""
        if len(self) < 2 or t0 < self.t[0] - 1e-12 or t1 > self.t[-1] + 1e-12:
            span = (self.t[0], self.t[-1]) if len(self) else (None, None)
            raise RangeError(f"IMU window [{t0}, {t1}] outside series span {span}")
        if t1 <= t0:
            raise RangeError(f"empty IMU window [{t0}, {t1}]")
        inner = (self.t > t0) & (self.t < t1)
        g0, a0 = self._interp(t0)
        g1, a1 = self._interp(t1)
        t = np.concatenate([[t0], self.t[inner], [t1]])
        gyro = np.vstack([g0, self.gyro[inner], g1])
        accel = np.vstack([a0, self.accel[inner], a1])
        return ImuSeries(t, gyro, accel)
