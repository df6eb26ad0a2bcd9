# mmlio/precal/__init__.py
from mmlio.precal.gicp import GicpParams, gicp_align, point_covariances
from mmlio.precal.calibration import (
    ExtrinsicSet, PrecalParams, accumulate_frames, calibrate_extrinsics, chain_extrinsics,
)
from mmlio.precal.alignment import AlignmentQueue, align_time_domain, synthesize_timestamps

__all__ = [
    "GicpParams", "gicp_align", "point_covariances", "ExtrinsicSet", "PrecalParams",
    "accumulate_frames", "calibrate_extrinsics", "chain_extrinsics", "AlignmentQueue",
    "align_time_domain", "synthesize_timestamps",
]
