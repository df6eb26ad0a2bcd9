# mmlio/imu/__init__.py
from mmlio.imu.measurements import ImuSample, ImuSeries
from mmlio.imu.preintegration import ImuNoise, PreintegratedImu, preintegrate, predict_state
from mmlio.imu.undistort import undistort_points, undistort_scan, sweep_motion
from mmlio.imu.initialization import static_initialization

__all__ = [
    "ImuSample", "ImuSeries", "ImuNoise", "PreintegratedImu", "preintegrate",
    "predict_state", "undistort_points", "undistort_scan", "sweep_motion",
    "static_initialization",
]
