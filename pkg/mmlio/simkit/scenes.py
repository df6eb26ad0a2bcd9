# mmlio/simkit/scenes.py
"""
Scene presets: world geometry, body trajectory, sensor models and mounting.

All scenes start with a stationary prefix (used for extrinsic calibration and
static initialization) and move the body at a fixed height above the floor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from mmlio.geom import Pose, Quaternion
from mmlio.simkit.sensors import SOLID_STATE, SPINNING, preset
from mmlio.simkit.trajectory import TrajectorySpec
from mmlio.simkit.world import World, box, room, wall
from mmlio.simkit.simulate import GRAVITY

KNOT_SPACING = 0.2
BODY_HEIGHT = 1.2
SOLID_STATE_OFFSET = 0.017


def _mount(t, yaw_deg=0.0, pitch_deg=0.0):
    q = (Quaternion.from_axis_angle([0, 0, 1], math.radians(yaw_deg))
         * Quaternion.from_axis_angle([0, 1, 0], math.radians(pitch_deg)))
    return Pose(q, t)


DEFAULT_T_V_TO_I = _mount([0.0, 0.0, 0.12], yaw_deg=2.0)
DEFAULT_T_H_TO_I = _mount([0.15, 0.0, 0.05], pitch_deg=-3.0)


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    world: World
    traj: TrajectorySpec
    sensors: dict
    T_v_to_i: Pose = DEFAULT_T_V_TO_I
    T_h_to_i: Pose = DEFAULT_T_H_TO_I
    static_duration: float = 1.5
    imu_rate: float = 200.0
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY.copy())
    h_offset: float = SOLID_STATE_OFFSET
    closed_loop: bool = False

    @property
    def duration(self):
        return self.traj.t_max - self.traj.t_min

    @property
    def T_v_to_h(self):
        return self.T_h_to_i.inverse().compose(self.T_v_to_i)

    def extrinsic(self, sensor_id):
        return self.T_v_to_i if sensor_id == "v" else self.T_h_to_i


# --- paths ---

def _rounded_rect_path(a, b, r):
    """
    Closed rounded rectangle (outer size a x b, corner radius r) starting at
    the middle of the bottom side heading +x, counter-clockwise. Returns
    (length, fn) where fn(s) gives (x, y, yaw).
    """
    sx, sy = a - 2 * r, b - 2 * r
    segments = []
    x, y, yaw = 0.0, -b / 2.0, 0.0
    for kind, length in (("line", sx / 2), ("arc", math.pi * r / 2), ("line", sy),
                         ("arc", math.pi * r / 2), ("line", sx), ("arc", math.pi * r / 2),
                         ("line", sy), ("arc", math.pi * r / 2), ("line", sx / 2)):
        if length <= 0.0:
            continue
        segments.append((kind, length, x, y, yaw))
        if kind == "line":
            x += length * math.cos(yaw)
            y += length * math.sin(yaw)
        else:
            cx, cy = x - r * math.sin(yaw), y + r * math.cos(yaw)
            yaw += math.pi / 2
            x, y = cx + r * math.sin(yaw), cy - r * math.cos(yaw)
    total = sum(seg[1] for seg in segments)

    def fn(s):
        s = min(max(s, 0.0), total)
        for kind, length, x0, y0, yaw0 in segments:
            if s <= length + 1e-12:
                break
            s -= length
        if kind == "line":
            return x0 + s * math.cos(yaw0), y0 + s * math.sin(yaw0), yaw0
        cx, cy = x0 - r * math.sin(yaw0), y0 + r * math.cos(yaw0)
        yaw = yaw0 + s / r
        return cx + r * math.sin(yaw), cy - r * math.cos(yaw), yaw

    return total, fn


def _straight_path(start, heading, length):
    def fn(s):
        return start[0] + s * math.cos(heading), start[1] + s * math.sin(heading), heading
    return length, fn


def _arc_length(tau, length, speed, ramp):
    """Distance travelled after `tau` seconds of motion with cosine speed ramps."""
    moving = length / speed + ramp
    tau = min(max(tau, 0.0), moving)

    def up(x):
        return speed * (x / 2.0 - ramp / (2.0 * math.pi) * math.sin(math.pi * x / ramp))

    if tau <= ramp:
        return up(tau)
    if tau >= moving - ramp:
        return length - up(moving - tau)
    return speed * ramp / 2.0 + speed * (tau - ramp)


def _path_trajectory(path, speed, ramp, static_duration, tail=0.5, origin=(0.0, 0.0)):
    length, fn = path
    moving = length / speed + ramp
    total = static_duration + moving + tail
    n = int(math.ceil(total / KNOT_SPACING))
    times = np.arange(n + 1) * KNOT_SPACING
    poses = []
    for t in times:
        x, y, yaw = fn(_arc_length(t - static_duration, length, speed, ramp))
        q = Quaternion.from_axis_angle([0, 0, 1], yaw)
        poses.append(Pose(q, [origin[0] + x, origin[1] + y, BODY_HEIGHT]))
    return TrajectorySpec(times, poses, bc_type="clamped")


def _hold(position, yaw, duration):
    n = int(math.ceil(duration / KNOT_SPACING))
    times = np.arange(n + 1) * KNOT_SPACING
    pose = Pose(Quaternion.from_axis_angle([0, 0, 1], yaw), position)
    return TrajectorySpec(times, [pose] * len(times), bc_type="clamped")


def _sensors(**overrides):
    return {
        "v": preset(SPINNING, **overrides.get("v", {})),
        "h": preset(SOLID_STATE, **overrides.get("h", {})),
    }


# --- worlds ---

def _calibration_room():
    patches = room(8.0, 6.0, 3.0)
    patches += box((2.0, -1.5, 0.0), (2.8, -0.5, 1.6), bottom=False)
    patches += box((2.5, 1.0, 0.0), (3.2, 2.2, 0.9), bottom=False)
    patches += box((-3.0, 1.5, 0.0), (-2.2, 2.5, 2.0), bottom=False)
    patches += box((-2.5, -2.4, 0.0), (-1.5, -1.6, 1.1), bottom=False)
    return World(patches)


def _hall():
    patches = room(34.0, 24.0, 6.0)
    patches += box((-10.0, -5.0, 0.0), (10.0, 5.0, 4.0), bottom=False)
    for x in np.arange(-15.0, 15.1, 5.0):
        for y in (-10.0, 10.0):
            patches += box((x - 0.3, y - 0.3, 0.0), (x + 0.3, y + 0.3, 6.0),
                           bottom=False, top=False)
    for y in (-2.5, 2.5):
        for x in (-15.0, 15.0):
            patches += box((x - 0.3, y - 0.3, 0.0), (x + 0.3, y + 0.3, 6.0),
                           bottom=False, top=False)
    return World(patches)


def _corridor(length=50.0, width=2.4, height=3.0):
    half = width / 2.0
    x0, x1 = -5.0, length - 5.0
    patches = [p for p in box((x0, -half, 0.0), (x1, half, height))
               if abs(p.normal[1]) < 0.5]
    # side walls interrupted by 1 m door recesses every 4 m
    doors = np.arange(x0 + 3.0, x1 - 2.0, 4.0)
    for side in (-1.0, 1.0):
        y = side * half
        depth = side * 0.3
        start = x0
        for x in doors:
            patches.append(wall((start, y), (x, y), 0.0, height))
            patches.append(wall((x, y), (x + 1.0, y), 2.1, height))
            patches.append(wall((x, y), (x, y + depth), 0.0, 2.1))
            patches.append(wall((x + 1.0, y), (x + 1.0, y + depth), 0.0, 2.1))
            patches.append(wall((x, y + depth), (x + 1.0, y + depth), 0.0, 2.1))
            start = x + 1.0
        patches.append(wall((start, y), (x1, y), 0.0, height))
    return World(patches)


def _office():
    patches = room(12.0, 3.7, 2.8)
    # desks, cabinets and a partition
    patches += box((-5.5, 1.2, 0.0), (-3.9, 1.85, 0.75), bottom=False)
    patches += box((-2.0, 1.3, 0.0), (-1.2, 1.85, 1.9), bottom=False)
    patches += box((1.0, -1.85, 0.0), (2.6, -1.2, 0.75), bottom=False)
    patches += box((3.5, 1.4, 0.0), (4.3, 1.85, 2.0), bottom=False)
    patches += box((-0.5, -1.85, 0.0), (0.1, -1.35, 1.4), bottom=False)
    patches.append(wall((5.2, -1.85), (5.2, -1.0), 0.0, 1.6))
    return World(patches)


# --- presets ---

def static_scene(duration=4.0, **sensor_overrides):
    return Scenario("static", _calibration_room(),
                    _hold([0.0, 0.0, BODY_HEIGHT], 0.0, duration),
                    _sensors(**sensor_overrides), static_duration=duration)


def room_scene(duration=2.0, T_v_to_i=DEFAULT_T_V_TO_I, T_h_to_i=DEFAULT_T_H_TO_I,
               **sensor_overrides):
    return Scenario("room", _calibration_room(),
                    _hold([0.3, -0.2, BODY_HEIGHT], 0.3, duration),
                    _sensors(**sensor_overrides), T_v_to_i=T_v_to_i, T_h_to_i=T_h_to_i,
                    static_duration=duration)


def hall_scene(speed=1.0, **sensor_overrides):
    path = _rounded_rect_path(26.0, 15.72, 2.0)
    return Scenario("hall", _hall(), _path_trajectory(path, speed, 2.0, 1.5),
                    _sensors(**sensor_overrides), closed_loop=True)


def corridor_scene(length=20.0, speed=0.8, **sensor_overrides):
    path = _straight_path((0.0, 0.0), 0.0, length)
    # solid-state unit looks at the right-hand wall
    T_h_to_i = _mount([0.15, -0.05, 0.05], yaw_deg=-90.0)
    return Scenario("corridor", _corridor(), _path_trajectory(path, speed, 1.5, 1.5),
                    _sensors(**sensor_overrides), T_h_to_i=T_h_to_i)


def office_scene(speed=0.6, **sensor_overrides):
    path = _rounded_rect_path(9.2, 1.2, 0.6)
    return Scenario("office", _office(), _path_trajectory(path, speed, 1.0, 1.5),
                    _sensors(**sensor_overrides), closed_loop=True)


SCENES = {
    "static": static_scene,
    "room": room_scene,
    "hall": hall_scene,
    "corridor": corridor_scene,
    "office": office_scene,
}


def make_scene(name, **kwargs):
    try:
        factory = SCENES[name]
    except KeyError:
        raise KeyError(f"unknown scene '{name}', expected one of {sorted(SCENES)}") from None
    return factory(**kwargs)
