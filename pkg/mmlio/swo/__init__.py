# mmlio/swo/__init__.py
from mmlio.swo.config import SwoConfig, select_keyframe
from mmlio.swo.localmap import LocalFeatureMap, update_local_map
from mmlio.swo.residuals import (
    edge_residual, edge_terms, fit_planes, imu_residual, plane_residual, plane_terms,
)
from mmlio.swo.problem import Keyframe, WindowProblem
from mmlio.swo.prior import MarginalPrior, marginalize_oldest, schur_marginalize
from mmlio.swo.optimizer import WindowStats, optimize_window, track_frame

__all__ = [
    "SwoConfig", "select_keyframe", "LocalFeatureMap", "update_local_map", "edge_residual",
    "edge_terms", "fit_planes", "imu_residual", "plane_residual", "plane_terms", "Keyframe",
    "WindowProblem", "MarginalPrior", "marginalize_oldest", "schur_marginalize",
    "WindowStats", "optimize_window", "track_frame",
]
