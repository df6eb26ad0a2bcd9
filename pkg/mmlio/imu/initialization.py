# mmlio/imu/initialization.py
import logging
import math

import numpy as np
from scipy.spatial.transform import Rotation

from mmlio.errors import RangeError
from mmlio.geom import NavState, Quaternion

logger = logging.getLogger(__name__)


def static_initialization(series, t0, t1, estimate_gyro_bias=True):
    """
    Gravity-aligned initial state from a stationary IMU interval: roll and
    pitch from the mean specific force, yaw fixed to zero, gyro bias from the
    mean angular rate.
    """
    window = series.slice_time(t0, t1)
    if len(window) < 2:
        raise RangeError(f"static initialization needs samples in [{t0}, {t1}]")
    a = window.accel.mean(axis=0)
    roll = math.atan2(a[1], a[2])
    pitch = math.atan2(-a[0], math.hypot(a[1], a[2]))
    x, y, z, w = Rotation.from_euler("ZYX", [0.0, pitch, roll]).as_quat()
    q0 = Quaternion(w, x, y, z)
    b_g = window.gyro.mean(axis=0) if estimate_gyro_bias else np.zeros(3)
    logger.info(
        f"Static init over {len(window)} samples: roll={math.degrees(roll):.3f}deg "
        f"pitch={math.degrees(pitch):.3f}deg |a|={np.linalg.norm(a):.4f}"
    )
    return NavState(np.zeros(3), q0, np.zeros(3), np.zeros(3), b_g)
