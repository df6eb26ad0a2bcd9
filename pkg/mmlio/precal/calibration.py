# mmlio/precal/calibration.py
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from mmlio.errors import RangeError
from mmlio.geom import Pose, compose
from mmlio.precal.gicp import GicpParams, gicp_align

logger = logging.getLogger(__name__)


def accumulate_frames(scans, n):
    """Concatenate the points of the first n (stationary) scans, sensor frame."""
    scans = list(scans)
    if n < 1:
        raise RangeError(f"frame count must be at least 1, got {n}")
    if len(scans) < n:
        raise RangeError(f"need {n} frames to accumulate, got {len(scans)}")
    return np.concatenate([s.xyz for s in scans[:n]], axis=0)


def chain_extrinsics(T_v_to_h, T_h_to_i):
    """Spinning→IMU extrinsic: apply spinning→solid-state, then solid-state→IMU."""
    return compose(T_h_to_i, T_v_to_h)


@dataclass(frozen=True, eq=False)
class ExtrinsicSet:
    T_h_to_i: Pose
    T_v_to_h: Pose
    fitness: float = float("nan")
    T_v_to_i: Pose = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "T_v_to_i", chain_extrinsics(self.T_v_to_h, self.T_h_to_i))

    @classmethod
    def from_v_to_i(cls, T_v_to_i, T_h_to_i):
        return cls(T_h_to_i, T_h_to_i.inverse().compose(T_v_to_i))

    def for_sensor(self, sensor):
        return self.T_v_to_i if sensor == "v" else self.T_h_to_i

    def as_report(self):
        return {
            "T_h_to_i": self.T_h_to_i.as_record(),
            "T_v_to_h": self.T_v_to_h.as_record(),
            "T_v_to_i": self.T_v_to_i.as_record(),
            "fitness_m2": None if math.isnan(self.fitness) else self.fitness,
        }


def calibrate_extrinsics(v_scans, h_scans, T_h_to_i, init=None, params=None, n_frames=10):
    """
    Estimate the spinning→solid-state extrinsic from stationary frames.

    The narrow solid-state cloud is registered into the 360° spinning cloud,
    so the GICP result is T_h_to_v and gets inverted. `init` is a guess for
    T_v_to_h; by default the spinning unit is assumed aligned with the IMU.
    """
    params = params or GicpParams()
    cloud_v = accumulate_frames(v_scans, n_frames)
    cloud_h = accumulate_frames(h_scans, n_frames)
    init = init if init is not None else T_h_to_i.inverse()
    T_h_to_v, fitness = gicp_align(cloud_h, cloud_v, init.inverse(), params)
    extr = ExtrinsicSet(T_h_to_i, T_h_to_v.inverse(), fitness)
    t = extr.T_v_to_h.translation
    logger.info(
        f"Calibrated T_v_to_h from {len(cloud_v)}+{len(cloud_h)} points: "
        f"t=({t[0]:.4f}, {t[1]:.4f}, {t[2]:.4f}) "
        f"angle={math.degrees(extr.T_v_to_h.rotation.angle()):.3f}deg fitness={fitness:.2e}"
    )
    return extr


class PrecalParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    n_frames: int = Field(10, ge=1, description="stationary frames accumulated per sensor")
    T_v_to_h: Optional[List[float]] = Field(None, min_length=7, max_length=7,
                                            description="known extrinsic tx ty tz qw qx qy qz")
    init: Optional[List[float]] = Field(None, min_length=7, max_length=7,
                                        description="calibration initial guess")

    @field_validator("T_v_to_h", "init", mode="before")
    @classmethod
    def _split_record(cls, value):
        if isinstance(value, str):
            return [float(v) for v in value.replace(",", " ").split()]
        return value
