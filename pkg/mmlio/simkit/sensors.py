# mmlio/simkit/sensors.py
"""Sensor models and their emission patterns."""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

SPINNING = "spinning"
SOLID_STATE = "solid_state"

# Rosette angular rates (rad/s); the ratio is irrational so the pattern never repeats.
ROSETTE_W1 = 2.0 * math.pi * 10.0
ROSETTE_W2 = 2.0 * math.pi * 10.0 * (1.0 - 0.05 / ((1.0 + math.sqrt(5.0)) / 2.0))


class SensorModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["spinning", "solid_state"]
    h_fov: float = Field(gt=0, le=360, description="degrees")
    v_fov: float = Field(gt=0, lt=180, description="degrees")
    channels_or_lines: int = Field(gt=0, le=255)
    rate: float = Field(10.0, gt=0, description="Hz")
    points_per_sweep: int = Field(gt=0)
    range_max: float = Field(60.0, gt=0, description="m")
    range_min: float = Field(0.1, ge=0, description="m")
    range_noise_sigma: float = Field(0.0, ge=0, description="m")
    pattern_seed: int = 0

    @property
    def period(self):
        return 1.0 / self.rate

    @property
    def sensor_id(self):
        return "v" if self.kind == SPINNING else "h"

    def channel_elevations(self):
        """Spinning channel elevations (rad), ring 0 lowest."""
        half = math.radians(self.v_fov) / 2.0
        return np.linspace(-half, half, self.channels_or_lines)


SENSOR_PRESETS = {
    # 16 channels over a 30° vertical FoV, 2° spacing, 1° azimuth resolution
    SPINNING: dict(kind=SPINNING, h_fov=360.0, v_fov=30.0, channels_or_lines=16,
                   rate=10.0, points_per_sweep=16 * 360, range_max=60.0,
                   range_noise_sigma=0.02),
    # 81.7° x 25.1° FoV with six emitter lines
    SOLID_STATE: dict(kind=SOLID_STATE, h_fov=81.7, v_fov=25.1, channels_or_lines=6,
                      rate=10.0, points_per_sweep=6 * 600, range_max=60.0,
                      range_noise_sigma=0.02),
}


def preset(kind, **overrides):
    params = dict(SENSOR_PRESETS[kind])
    params.update(overrides)
    return SensorModel(**params)


def _directions(az, el):
    ce = np.cos(el)
    return np.column_stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)])


def emission_pattern(model, sweep_start):
    """
    (time offsets, unit directions in the sensor frame, ring/line ids) for one
    sweep, in emission order. Offsets lie strictly inside (0, period).
    """
    period = model.period
    n_lines = model.channels_or_lines
    per_line = max(model.points_per_sweep // n_lines, 1)
    slots = (np.arange(per_line) + 0.5) / per_line

    if model.kind == SPINNING:
        az = 2.0 * math.pi * slots * (model.h_fov / 360.0)
        el = model.channel_elevations()
        az_grid = np.repeat(az, n_lines)
        el_grid = np.tile(el, per_line)
        rings = np.tile(np.arange(n_lines, dtype=np.uint8), per_line)
        offsets = np.repeat(slots * period, n_lines)
        return offsets, _directions(az_grid, el_grid), rings

    rng = np.random.default_rng(model.pattern_seed)
    phase_a, phase_b = rng.uniform(0.0, 2.0 * math.pi, size=2)
    t_abs = sweep_start + slots * period
    lines = np.arange(n_lines)
    a = ROSETTE_W1 * t_abs[:, None] + phase_a + 2.0 * math.pi * lines[None, :] / n_lines
    b = ROSETTE_W2 * t_abs[:, None] + phase_b
    u = 0.5 * (np.cos(a) + np.cos(b))
    v = 0.5 * (np.sin(a) - np.sin(b))
    az = (u * math.radians(model.h_fov) / 2.0).ravel()
    el = (v * math.radians(model.v_fov) / 2.0).ravel()
    rings = np.tile(lines.astype(np.uint8), per_line)
    offsets = np.repeat(slots * period, n_lines)
    return offsets, _directions(az, el), rings
