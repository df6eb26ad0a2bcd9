# mmlio/imu/preintegration.py
"""
IMU preintegration between two keyframe times.

Deltas are gravity-free and expressed in the body frame at the start time:
    ΔQ = R_kᵀ R_{k+1}
    ΔV = R_kᵀ (v_{k+1} - v_k - g·dt)
    ΔP = R_kᵀ (p_{k+1} - p_k - v_k·dt - ½ g·dt²)
Integration uses the midpoint rule per sample interval. Bias Jacobians are the
exact first-order derivatives of that discrete scheme, so a bias change δb is
applied as Δ ⊕ J·δb without re-integration.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mmlio.errors import RangeError
from mmlio.geom import NavState, Quaternion, quat_boxplus, right_jacobian, skew, so3_exp
from mmlio.imu.measurements import ImuSeries

logger = logging.getLogger(__name__)

# Covariance block order (rot, vel, pos)
C_ROT, C_VEL, C_POS = slice(0, 3), slice(3, 6), slice(6, 9)


class ImuNoise(BaseModel):
    """Continuous-time noise densities of the IMU."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gyro_noise: float = Field(1e-3, gt=0, description="rad/s/sqrt(Hz)")
    accel_noise: float = Field(1e-2, gt=0, description="m/s^2/sqrt(Hz)")
    gyro_walk: float = Field(1e-5, gt=0, description="rad/s^2/sqrt(Hz)")
    accel_walk: float = Field(1e-4, gt=0, description="m/s^3/sqrt(Hz)")


def _zeros33():
    return np.zeros((3, 3))


@dataclass(frozen=True, eq=False)
class PreintegratedImu:
    t_start: float
    t_end: float
    dP: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dV: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dQ: Quaternion = field(default_factory=Quaternion.identity)
    dt_total: float = None
    bias_a: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bias_g: np.ndarray = field(default_factory=lambda: np.zeros(3))
    J_R_bg: np.ndarray = field(default_factory=_zeros33)
    J_V_ba: np.ndarray = field(default_factory=_zeros33)
    J_V_bg: np.ndarray = field(default_factory=_zeros33)
    J_P_ba: np.ndarray = field(default_factory=_zeros33)
    J_P_bg: np.ndarray = field(default_factory=_zeros33)
    cov: np.ndarray = field(default_factory=lambda: np.zeros((9, 9)))
    noise: ImuNoise = field(default_factory=ImuNoise)

    def __post_init__(self):
        if self.dt_total is None:
            object.__setattr__(self, "dt_total", float(self.t_end - self.t_start))
        for name in ("dP", "dV", "bias_a", "bias_g", "J_R_bg", "J_V_ba", "J_V_bg",
                     "J_P_ba", "J_P_bg", "cov"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def identity(cls, t_start, t_end, noise=None):
        """Zero-motion delta spanning [t_start, t_end]."""
        return cls(t_start, t_end, noise=noise or ImuNoise())

    @property
    def dt(self):
        return self.dt_total

    def rotation_angle(self):
        return self.dQ.angle()

    def corrected(self, b_a, b_g):
        """First-order bias update: returns (ΔQ, ΔV, ΔP) at the new biases."""
        dba = np.asarray(b_a, dtype=np.float64) - self.bias_a
        dbg = np.asarray(b_g, dtype=np.float64) - self.bias_g
        dQ = quat_boxplus(self.dQ, self.J_R_bg @ dbg)
        dV = self.dV + self.J_V_ba @ dba + self.J_V_bg @ dbg
        dP = self.dP + self.J_P_ba @ dba + self.J_P_bg @ dbg
        return dQ, dV, dP

    def covariance15(self):
        """Covariance of the 15-dim residual (rot, vel, pos, b_a, b_g)."""
        C = np.zeros((15, 15))
        C[:9, :9] = self.cov
        C[9:12, 9:12] = np.eye(3) * self.noise.accel_walk ** 2 * max(self.dt_total, 1e-6)
        C[12:15, 12:15] = np.eye(3) * self.noise.gyro_walk ** 2 * max(self.dt_total, 1e-6)
        return C + np.eye(15) * 1e-14

    def compose(self, other):
        """Concatenate with the delta that starts where this one ends."""
        if abs(self.t_end - other.t_start) > 1e-9:
            raise RangeError(
                f"cannot compose deltas: [{self.t_start}, {self.t_end}] then "
                f"[{other.t_start}, {other.t_end}] are not contiguous")
        if not (np.allclose(self.bias_a, other.bias_a, atol=1e-12)
                and np.allclose(self.bias_g, other.bias_g, atol=1e-12)):
            raise RangeError("cannot compose deltas linearized at different biases")
        RA = self.dQ.matrix
        RB = other.dQ.matrix
        dtB = other.dt_total

        dQ = self.dQ * other.dQ
        dV = self.dV + RA @ other.dV
        dP = self.dP + self.dV * dtB + RA @ other.dP

        J_R_bg = RB.T @ self.J_R_bg + other.J_R_bg
        J_V_ba = self.J_V_ba + RA @ other.J_V_ba
        J_V_bg = self.J_V_bg + RA @ other.J_V_bg - RA @ skew(other.dV) @ self.J_R_bg
        J_P_ba = self.J_P_ba + self.J_V_ba * dtB + RA @ other.J_P_ba
        J_P_bg = (self.J_P_bg + self.J_V_bg * dtB + RA @ other.J_P_bg
                  - RA @ skew(other.dP) @ self.J_R_bg)

        FA = np.eye(9)
        FA[C_ROT, C_ROT] = RB.T
        FA[C_VEL, C_ROT] = -RA @ skew(other.dV)
        FA[C_POS, C_ROT] = -RA @ skew(other.dP)
        FA[C_POS, C_VEL] = np.eye(3) * dtB
        FB = np.eye(9)
        FB[C_VEL, C_VEL] = RA
        FB[C_POS, C_POS] = RA
        cov = FA @ self.cov @ FA.T + FB @ other.cov @ FB.T

        return PreintegratedImu(
            self.t_start, other.t_end, dP, dV, dQ, self.dt_total + dtB,
            self.bias_a, self.bias_g, J_R_bg, J_V_ba, J_V_bg, J_P_ba, J_P_bg,
            0.5 * (cov + cov.T), self.noise,
        )


def preintegrate(samples, bias=None, noise=None):
    """Integrate IMU samples spanning [t_k, t_{k+1}] into a PreintegratedImu."""
    series = ImuSeries.coerce(samples)
    noise = noise or ImuNoise()
    n = len(series)
    if n < 2:
        raise RangeError(f"preintegration needs at least 2 samples, got {n}")
    dts = np.diff(series.t)
    if np.any(dts <= 0.0):
        bad = int(np.flatnonzero(dts <= 0.0)[0]) + 1
        raise RangeError(f"IMU timestamps not strictly increasing at sample {bad}")

    b_a = np.zeros(3) if bias is None else np.asarray(bias[0], dtype=np.float64)
    b_g = np.zeros(3) if bias is None else np.asarray(bias[1], dtype=np.float64)
    acc = series.accel - b_a
    gyr = series.gyro - b_g

    R = np.eye(3)
    v = np.zeros(3)
    p = np.zeros(3)
    J_R_bg = np.zeros((3, 3))
    J_V_ba = np.zeros((3, 3))
    J_V_bg = np.zeros((3, 3))
    J_P_ba = np.zeros((3, 3))
    J_P_bg = np.zeros((3, 3))
    cov = np.zeros((9, 9))
    q_g = noise.gyro_noise ** 2
    q_a = noise.accel_noise ** 2
    I3 = np.eye(3)

    for k in range(n - 1):
        dt = dts[k]
        phi = 0.5 * (gyr[k] + gyr[k + 1]) * dt
        dR = so3_exp(phi)
        Jr = right_jacobian(phi)
        R1 = R @ dR
        S0 = skew(acc[k])
        S1 = skew(acc[k + 1])
        a_mid = 0.5 * (R @ acc[k] + R1 @ acc[k + 1])

        J_R1_bg = dR.T @ J_R_bg - Jr * dt
        da_dba = -0.5 * (R + R1)
        da_dbg = -0.5 * (R @ S0 @ J_R_bg + R1 @ S1 @ J_R1_bg)

        F = np.eye(9)
        A = -0.5 * (R @ S0 + R1 @ S1 @ dR.T)
        F[C_ROT, C_ROT] = dR.T
        F[C_VEL, C_ROT] = A * dt
        F[C_POS, C_ROT] = 0.5 * A * dt * dt
        F[C_POS, C_VEL] = I3 * dt
        G = np.zeros((9, 6))
        G[C_ROT, 0:3] = Jr * dt
        G[C_VEL, 3:6] = 0.5 * (R + R1) * dt
        G[C_POS, 3:6] = 0.25 * (R + R1) * dt * dt
        Q = np.diag([q_g / dt] * 3 + [q_a / dt] * 3)
        cov = F @ cov @ F.T + G @ Q @ G.T

        p = p + v * dt + 0.5 * a_mid * dt * dt
        v = v + a_mid * dt
        J_P_ba = J_P_ba + J_V_ba * dt + 0.5 * da_dba * dt * dt
        J_P_bg = J_P_bg + J_V_bg * dt + 0.5 * da_dbg * dt * dt
        J_V_ba = J_V_ba + da_dba * dt
        J_V_bg = J_V_bg + da_dbg * dt
        J_R_bg = J_R1_bg
        R = R1

    dt_total = float(np.sum(dts))
    logger.debug(f"Preintegrated {n} samples over {dt_total:.4f}s")
    return PreintegratedImu(
        float(series.t[0]), float(series.t[-1]), p, v, Quaternion.from_matrix(R), dt_total,
        b_a, b_g, J_R_bg, J_V_ba, J_V_bg, J_P_ba, J_P_bg, 0.5 * (cov + cov.T), noise,
    )


def predict_state(prev, delta, g):
    """Propagate the previous optimized state through a delta (initial guess)."""
    g = np.asarray(g, dtype=np.float64)
    dt = delta.dt_total
    dQ, dV, dP = delta.corrected(prev.b_a, prev.b_g)
    R = prev.q.matrix
    return NavState(
        prev.p + prev.v * dt + 0.5 * g * dt * dt + R @ dP,
        prev.q * dQ,
        prev.v + g * dt + R @ dV,
        prev.b_a,
        prev.b_g,
    )
