# mmlio/simkit/simulate.py
import logging

import numpy as np

from mmlio.errors import RangeError
from mmlio.imu.measurements import ImuSeries
from mmlio.scan import Scan
from mmlio.simkit.sensors import emission_pattern

logger = logging.getLogger(__name__)

GRAVITY = np.array([0.0, 0.0, -9.81])
MIN_IMU_RATE = 100.0


def simulate_scan(world, model, traj, sweep_start, extrinsic=None, noise_seed=0):
    """
    One sweep of `model` mounted on the body of `traj` through `extrinsic`
    (sensor→body, identity when omitted). Each point is expressed in the
    sensor frame at its own emission time, so motion distortion is present.
    """
    sweep_start = float(sweep_start)
    sweep_end = sweep_start + model.period
    if sweep_start < traj.t_min - 1e-9 or sweep_end > traj.t_max + 1e-9:
        raise RangeError(
            f"sweep [{sweep_start:.4f}, {sweep_end:.4f}] outside trajectory span "
            f"[{traj.t_min:.4f}, {traj.t_max:.4f}]")
    if len(world) == 0:
        return Scan.empty(model.sensor_id, sweep_start, sweep_end)

    offsets, dirs, rings = emission_pattern(model, sweep_start)
    times = sweep_start + offsets
    R_body = traj.rotation_matrices(times)
    p_body = traj.position(times)
    if extrinsic is not None:
        R_sensor = R_body @ extrinsic.R
        origins = p_body + np.einsum("nij,j->ni", R_body, extrinsic.translation)
    else:
        R_sensor = R_body
        origins = p_body
    dirs_world = np.einsum("nij,nj->ni", R_sensor, dirs)

    depth, _ = world.cast(origins, dirs_world, model.range_min)
    hit = np.isfinite(depth) & (depth <= model.range_max)

    if model.range_noise_sigma > 0.0:
        rng = np.random.default_rng(
            [model.pattern_seed, int(noise_seed), int(round(sweep_start * 1e6))])
        depth = depth + rng.normal(0.0, model.range_noise_sigma, size=len(depth))
    xyz = depth[hit, None] * dirs[hit]
    # points are stored as float32 on disk
    xyz = xyz.astype(np.float32).astype(np.float64)
    return Scan(model.sensor_id, sweep_start, sweep_end, times[hit], xyz, rings[hit])


def simulate_imu(traj, rate, bias=None, noise=None, gravity=GRAVITY, seed=0, t0=None, t1=None):
    """
    Gyro and accelerometer readings at `rate` Hz from the analytic trajectory
    derivatives: ω̃ = ω + b_g + n_g, ã = Rᵀ(a - g) + b_a + n_a.

    `noise` is an ImuNoise (continuous densities); None means noise-free.
    """
    if rate < MIN_IMU_RATE:
        raise RangeError(f"IMU rate {rate} Hz below the {MIN_IMU_RATE:.0f} Hz minimum")
    t0 = traj.t_min if t0 is None else t0
    t1 = traj.t_max if t1 is None else t1
    n = int(np.floor((t1 - t0) * rate + 1e-9)) + 1
    t = t0 + np.arange(n) / rate
    b_a, b_g = (np.zeros(3), np.zeros(3)) if bias is None else (
        np.asarray(bias[0], dtype=np.float64), np.asarray(bias[1], dtype=np.float64))

    R = traj.rotation_matrices(t)
    gyro = traj.angular_velocity(t) + b_g
    accel = np.einsum("nji,nj->ni", R, traj.acceleration(t) - np.asarray(gravity)) + b_a
    if noise is not None:
        rng = np.random.default_rng(seed)
        gyro = gyro + rng.normal(0.0, noise.gyro_noise * np.sqrt(rate), size=gyro.shape)
        accel = accel + rng.normal(0.0, noise.accel_noise * np.sqrt(rate), size=accel.shape)
    logger.debug(f"Simulated {n} IMU samples at {rate:g} Hz over [{t0:.3f}, {t1:.3f}]")
    return ImuSeries(t, gyro, accel)


def ground_truth(traj, times):
    """(N, 8) rows t, px, py, pz, qw, qx, qy, qz."""
    times = np.asarray(times, dtype=np.float64)
    rows = [[t, *pose.as_record()] for t, pose in zip(times, traj.poses(times))]
    return np.array(rows).reshape(-1, 8)
