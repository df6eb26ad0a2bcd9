# mmlio/simkit/trajectory.py
"""
Ground-truth body trajectory through control poses.

Translation is a C² cubic spline (analytic velocity and acceleration).
Rotation is R(t) = R_i · Exp(φ(s)) per segment, with φ a cubic Hermite curve in
the tangent space of the segment start whose end tangents are chosen from the
knot body rates, so the body angular velocity is continuous across knots.
"""

import numpy as np
from scipy.interpolate import CubicSpline

from mmlio.errors import RangeError
from mmlio.geom import Pose, Quaternion, right_jacobian_inv, so3_log


def _batch_skew(v):
    K = np.zeros(v.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -v[..., 2], v[..., 1]
    K[..., 1, 0], K[..., 1, 2] = v[..., 2], -v[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -v[..., 1], v[..., 0]
    return K


def _batch_exp(phi):
    theta = np.linalg.norm(phi, axis=-1)[..., None, None]
    K = _batch_skew(phi)
    K2 = K @ K
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta ** 2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta ** 2 / 24.0, (1.0 - np.cos(safe)) / safe ** 2)
    return np.eye(3) + a * K + b * K2


def _batch_jr(phi):
    theta = np.linalg.norm(phi, axis=-1)[..., None, None]
    K = _batch_skew(phi)
    K2 = K @ K
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 0.5 - theta ** 2 / 24.0, (1.0 - np.cos(safe)) / safe ** 2)
    b = np.where(small, 1.0 / 6.0 - theta ** 2 / 120.0, (safe - np.sin(safe)) / safe ** 3)
    return np.eye(3) - a * K + b * K2


class TrajectorySpec:
    def __init__(self, times, poses, bc_type="not-a-knot", knot_rates=None):
        times = np.asarray(times, dtype=np.float64)
        poses = list(poses)
        if len(times) < 2 or len(times) != len(poses):
            raise RangeError("trajectory needs at least two control poses with matching times")
        if np.any(np.diff(times) <= 0.0):
            raise RangeError("control times must be strictly increasing")
        self.times = times
        self.control_poses = poses
        self.bc_type = bc_type

        positions = np.array([p.translation for p in poses])
        self._pos = CubicSpline(times, positions, bc_type=bc_type, axis=0)
        self._vel = self._pos.derivative(1)
        self._acc = self._pos.derivative(2)

        self._R = np.array([p.R for p in poses])
        h = np.diff(times)
        phi1 = np.array([so3_log(self._R[i].T @ self._R[i + 1]) for i in range(len(h))])
        rates = self._knot_rates(phi1, h) if knot_rates is None else np.asarray(knot_rates, float)
        self._h = h
        self._phi1 = phi1
        self._m0 = rates[:-1] * h[:, None]
        self._m1 = np.array([right_jacobian_inv(phi1[i]) @ rates[i + 1] * h[i]
                             for i in range(len(h))])

    def _knot_rates(self, phi1, h):
        n = len(self.times)
        rates = np.zeros((n, 3))
        for k in range(1, n - 1):
            rates[k] = so3_log(self._R[k - 1].T @ self._R[k + 1]) / (h[k - 1] + h[k])
        if self.bc_type == "clamped":
            return rates
        rates[0] = phi1[0] / h[0]
        rates[-1] = phi1[-1] / h[-1]
        return rates

    @property
    def t_min(self):
        return float(self.times[0])

    @property
    def t_max(self):
        return float(self.times[-1])

    def _check(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(t < self.t_min - 1e-9) or np.any(t > self.t_max + 1e-9):
            raise RangeError(f"time outside trajectory span [{self.t_min}, {self.t_max}]")
        return np.clip(t, self.t_min, self.t_max)

    # --- translation ---

    def position(self, t):
        return self._pos(self._check(t))

    def velocity(self, t):
        return self._vel(self._check(t))

    def acceleration(self, t):
        return self._acc(self._check(t))

    # --- rotation ---

    def _segment(self, t):
        t = self._check(t)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self._h) - 1)
        s = (t - self.times[i]) / self._h[i]
        return i, s

    def _hermite(self, i, s):
        s2, s3 = s * s, s * s * s
        h10, h01, h11 = s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2
        d10, d01, d11 = 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s
        phi = (h10[:, None] * self._m0[i] + h01[:, None] * self._phi1[i]
               + h11[:, None] * self._m1[i])
        dphi = (d10[:, None] * self._m0[i] + d01[:, None] * self._phi1[i]
                + d11[:, None] * self._m1[i])
        return phi, dphi

    def rotation_matrices(self, t):
        """(N, 3, 3) body→world rotations."""
        i, s = self._segment(t)
        phi, _ = self._hermite(i, s)
        return self._R[i] @ _batch_exp(phi)

    def angular_velocity(self, t):
        """(N, 3) body-frame angular rate."""
        i, s = self._segment(t)
        phi, dphi = self._hermite(i, s)
        return np.einsum("nij,nj->ni", _batch_jr(phi), dphi) / self._h[i][:, None]

    # --- convenience ---

    def pose(self, t):
        R = self.rotation_matrices(t)[0]
        return Pose(Quaternion.from_matrix(R), self.position(t)[0])

    def poses(self, times):
        Rs = self.rotation_matrices(times)
        ps = self.position(times)
        return [Pose(Quaternion.from_matrix(R), p) for R, p in zip(Rs, ps)]


def stationary(pose, t0, t1):
    """A trajectory that holds one pose over [t0, t1]."""
    return TrajectorySpec([t0, t1], [pose, pose], bc_type="clamped")
