# mmlio/swo/config.py
import math

from pydantic import BaseModel, ConfigDict, Field


class SwoConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    window_size: int = Field(4, ge=2, description="keyframes in the window (tau)")
    key_angle_deg: float = Field(30.0, gt=0, description="keyframe rotation threshold")
    key_dt: float = Field(2.0, gt=0, description="keyframe time threshold, s")
    map_window: int = Field(20, ge=1, description="keyframes kept in the local map (W)")
    max_outer: int = Field(4, ge=1, description="re-association rounds")
    max_inner: int = Field(10, ge=1, description="LM iterations per round")
    param_tol: float = Field(1e-6, gt=0)
    robust: bool = True
    huber_delta: float = Field(0.1, gt=0, description="m")
    lidar_sigma: float = Field(0.05, gt=0, description="m")
    corr_radius: float = Field(1.0, gt=0, description="m")
    edge_neighbors: int = Field(2, ge=2)
    plane_neighbors: int = Field(5, ge=3)
    plane_fit_tol: float = Field(0.05, gt=0, description="m")
    lm_lambda: float = Field(1e-4, gt=0)
    min_correspondences: int = Field(1, ge=1, description="below this the window is IMU-only")
    divergence_norm: float = Field(1e6, gt=0)

    @property
    def key_angle(self):
        return math.radians(self.key_angle_deg)


def select_keyframe(imu_drift_angle, dt_since_last, cfg=None):
    """Admit a keyframe once rotation or elapsed time since the last one exceeds its threshold."""
    cfg = cfg or SwoConfig()
    return imu_drift_angle > cfg.key_angle or dt_since_last > cfg.key_dt
