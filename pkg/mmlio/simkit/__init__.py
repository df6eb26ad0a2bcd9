# mmlio/simkit/__init__.py
"""
Ground-truth simulator. The dataset writer lives in `mmlio.simkit.dataset`
and is imported from there.
"""
from mmlio.simkit.world import Patch, World, box, room, wall
from mmlio.simkit.sensors import SOLID_STATE, SPINNING, SensorModel, emission_pattern, preset
from mmlio.simkit.trajectory import TrajectorySpec, stationary
from mmlio.simkit.simulate import GRAVITY, ground_truth, simulate_imu, simulate_scan
from mmlio.simkit.scenes import SCENES, Scenario, make_scene

__all__ = [
    "Patch", "World", "box", "room", "wall", "SOLID_STATE", "SPINNING", "SensorModel",
    "emission_pattern", "preset", "TrajectorySpec", "stationary", "GRAVITY", "ground_truth",
    "simulate_imu", "simulate_scan", "SCENES", "Scenario", "make_scene",
]
