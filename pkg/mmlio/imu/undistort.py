# mmlio/imu/undistort.py
"""Per-point motion compensation of a sweep into its sweep-end frame."""

import logging

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from mmlio.errors import UndistortionError

logger = logging.getLogger(__name__)

# Points may sit this far outside the delta interval (s).
TIME_SLACK = 1e-3


def sweep_motion(delta, state=None, gravity=None):
    """
    Body motion over the delta interval as (ΔR, displacement), both in the
    start frame. Without a state the preintegrated ΔP is taken as the
    displacement; with one, velocity and gravity terms are added back.
    """
    dQ, dV, dP = delta.dQ, delta.dV, delta.dP
    disp = np.array(dP, dtype=np.float64)
    if state is not None:
        dQ, dV, dP = delta.corrected(state.b_a, state.b_g)
        dt = delta.dt_total
        g = np.zeros(3) if gravity is None else np.asarray(gravity, dtype=np.float64)
        disp = dP + state.q.matrix.T @ (state.v * dt + 0.5 * g * dt * dt)
    return dQ, disp


def undistort_points(xyz, t, delta, state=None, gravity=None, extrinsic=None):
    """
    Map points observed at times `t` into the body (or sensor, via
    `extrinsic` sensor→body) frame at delta.t_end. Rotation is slerped and
    translation interpolated linearly by s = (t - t_start) / (t_end - t_start).
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if len(t) == 0:
        return xyz.copy()
    t0, t1 = delta.t_start, delta.t_end
    outside = (t < t0 - TIME_SLACK) | (t > t1 + TIME_SLACK) | np.isnan(t)
    if np.any(outside):
        idx = int(np.flatnonzero(outside)[0])
        raise UndistortionError(idx, float(t[idx]), t0, t1)

    dQ, disp = sweep_motion(delta, state, gravity)
    if dQ.angle() == 0.0 and not np.any(disp):
        return xyz

    span = t1 - t0
    s = np.clip((t - t0) / span, 0.0, 1.0) if span > 0 else np.ones_like(t)
    key_rots = Rotation.from_quat([[0.0, 0.0, 0.0, 1.0], [dQ.x, dQ.y, dQ.z, dQ.w]])
    rot_s = Slerp([0.0, 1.0], key_rots)(s)

    pts = xyz if extrinsic is None else extrinsic.apply(xyz)
    in_start = rot_s.apply(pts) + s[:, None] * disp
    R_end = dQ.matrix
    in_end = (in_start - disp) @ R_end
    if extrinsic is not None:
        in_end = extrinsic.inverse().apply(in_end)
    return in_end


def undistort_scan(scan, delta, state=None, gravity=None, extrinsic=None):
    """Deskew a Scan; timestamps are preserved."""
    if len(scan) == 0:
        return scan
    out = undistort_points(scan.xyz, scan.t, delta, state, gravity, extrinsic)
    if out is scan.xyz:
        return scan
    logger.debug(f"Undistorted {len(scan)} points of sweep {scan.sensor}@{scan.t_start:.3f}")
    return scan.with_points(out)
