# mmlio/pipeline/__init__.py
from mmlio.pipeline.dataset import Dataset, Manifest, read_dataset, read_manifest
from mmlio.pipeline.metrics import Metrics, evaluate
from mmlio.pipeline.mapexport import export_map, read_map
from mmlio.pipeline.params import MODES, PipelineParams
from mmlio.pipeline.report import RunReport, read_report, read_trajectory, write_report
from mmlio.pipeline.runner import RunResult, resolve_extrinsics, run_pipeline

__all__ = [
    "Dataset", "Manifest", "read_dataset", "read_manifest", "Metrics", "evaluate",
    "export_map", "read_map", "MODES", "PipelineParams", "RunReport", "read_report",
    "read_trajectory", "write_report", "RunResult", "resolve_extrinsics", "run_pipeline",
]
