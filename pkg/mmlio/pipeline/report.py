# mmlio/pipeline/report.py
import json
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from mmlio.errors import DatasetError
from mmlio.pipeline.dataset import GROUNDTRUTH_HEADER, read_csv, write_csv
from mmlio.pipeline.metrics import Metrics

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TRAJECTORY_FILE = "trajectory.csv"
GRAPH_FILE = "graph.txt"
MAP_FILE = "map.ply"


class FrameCounts(BaseModel):
    """Raw and feature point counts of one frame per sensor."""

    frame: int
    t: float
    v_raw: int = 0
    v_edges: int = 0
    v_planes: int = 0
    h_raw: int = 0
    h_edges: int = 0
    h_planes: int = 0
    bad_frame: bool = False
    keyframe: bool = False
    imu_only: bool = False


class LoopClosure(BaseModel):
    i: int
    j: int
    correction_m: float


class RunReport(BaseModel):
    mode: str
    dataset: str
    frames: int = 0
    keyframes: int = 0
    diverged: bool = False
    last_good_frame: Optional[int] = None
    bad_frames: int = 0
    imu_only_frames: int = 0
    metrics: Optional[Metrics] = None
    loop_closures: List[LoopClosure] = Field(default_factory=list)
    extrinsics: Dict[str, Any] = Field(default_factory=dict)
    timing_ms: Dict[str, float] = Field(default_factory=dict)
    feature_summary: Dict[str, float] = Field(default_factory=dict)
    frame_counts: List[FrameCounts] = Field(default_factory=list)
    settings: Dict[str, Any] = Field(default_factory=dict)
    trajectory: List[List[float]] = Field(default_factory=list, exclude=True)

    @property
    def end_to_end_error_m(self):
        return None if self.metrics is None else self.metrics.end_to_end_error_m

    @property
    def ate_rmse_m(self):
        return None if self.metrics is None else self.metrics.ate_rmse_m

    def trajectory_array(self):
        return np.asarray(self.trajectory, dtype=np.float64).reshape(-1, 8)

    def deterministic_view(self):
        """Report content without wall-clock measurements."""
        return self.model_dump(mode="json", exclude={"timing_ms"})


def summarize_counts(frame_counts):
    """Average feature counts per frame and sensor over the frames that saw the sensor."""
    out = {}
    for sensor in ("v", "h"):
        rows = [c for c in frame_counts if getattr(c, f"{sensor}_raw") > 0]
        if not rows:
            continue
        for field in ("raw", "edges", "planes"):
            out[f"{sensor}_{field}"] = float(np.mean([getattr(c, f"{sensor}_{field}")
                                                      for c in rows]))
    return out


def write_trajectory(traj, path):
    write_csv(path, np.asarray(traj, dtype=np.float64).reshape(-1, 8), GROUNDTRUTH_HEADER)
    return path


def read_trajectory(path):
    return read_csv(path, GROUNDTRUTH_HEADER)


def write_report(report, out_dir):
    """report.json and trajectory.csv under `out_dir`."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, REPORT_FILE)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.model_dump(mode="json"), fh, indent=2, sort_keys=True)
    except OSError as exc:
        raise DatasetError(path, f"cannot write report: {exc.strerror or exc}") from exc
    write_trajectory(report.trajectory_array(), os.path.join(out_dir, TRAJECTORY_FILE))
    logger.info(f"Wrote run report to {out_dir}")
    return path


def read_report(out_dir):
    path = os.path.join(out_dir, REPORT_FILE)
    try:
        with open(path, encoding="utf-8") as fh:
            report = RunReport.model_validate_json(fh.read())
    except OSError as exc:
        raise DatasetError(path, f"cannot read report: {exc.strerror or exc}") from exc
    traj_path = os.path.join(out_dir, TRAJECTORY_FILE)
    if os.path.exists(traj_path):
        report = report.model_copy(update={"trajectory": read_trajectory(traj_path).tolist()})
    return report
