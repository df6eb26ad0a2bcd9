# mmlio/features/__init__.py
from mmlio.features.rings import RingSet, organize_scan, mark_continuity, ring_from_elevation
from mmlio.features.cloud import (
    EDGE_BREAK, EDGE_LINE, FRAME_IMU, FRAME_SOLID_STATE, FRAME_SPINNING, FRAME_WORLD,
    FeatureCloud, concatenate, merge_features, voxel_downsample,
)
from mmlio.features.classify import (
    LABEL_BREAK, LABEL_CORNER, LABEL_NONE, LABEL_PLANE, FeatureParams, classify_points,
    extract_features,
)
from mmlio.features.gating import detect_bad_frame, filter_near

__all__ = [
    "RingSet", "organize_scan", "mark_continuity", "ring_from_elevation", "EDGE_BREAK",
    "EDGE_LINE", "FRAME_IMU", "FRAME_SOLID_STATE", "FRAME_SPINNING", "FRAME_WORLD",
    "FeatureCloud", "concatenate", "merge_features", "voxel_downsample", "LABEL_BREAK",
    "LABEL_CORNER", "LABEL_NONE", "LABEL_PLANE", "FeatureParams", "classify_points",
    "extract_features", "detect_bad_frame", "filter_near",
]
