# mmlio/pipeline/dataset.py
"""
On-disk dataset format.

    <dir>/manifest.json          sensor models, scan listing, extrinsics, gravity
    <dir>/scans/<id>_NNNNNN.bin  per point: <f8 t, <f4 x, <f4 y, <f4 z, u1 ring (21 bytes)
    <dir>/imu.csv                t,wx,wy,wz,ax,ay,az
    <dir>/groundtruth.csv        t,px,py,pz,qw,qx,qy,qz (optional)
"""

import json
import logging
import os
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mmlio.errors import DatasetError
from mmlio.geom import Pose
from mmlio.imu.measurements import ImuSeries
from mmlio.scan import Scan
from mmlio.simkit.sensors import SensorModel

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
IMU_FILE = "imu.csv"
GROUNDTRUTH_FILE = "groundtruth.csv"
IMU_HEADER = "t,wx,wy,wz,ax,ay,az"
GROUNDTRUTH_HEADER = "t,px,py,pz,qw,qx,qy,qz"

POINT_DTYPE = np.dtype([("t", "<f8"), ("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("ring", "u1")])
RECORD_SIZE = POINT_DTYPE.itemsize  # 21


# --- manifest schema ---

class ScanEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    file: str
    t_start: float
    t_end: float
    points: int = Field(ge=0)


class SensorStream(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: SensorModel
    scans: List[ScanEntry] = Field(default_factory=list)


class Extrinsics(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T_h_to_i: List[float] = Field(min_length=7, max_length=7)
    T_v_to_h: Optional[List[float]] = Field(None, min_length=7, max_length=7)
    T_v_to_i: Optional[List[float]] = Field(None, min_length=7, max_length=7)


class Manifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int = 1
    scene: Optional[str] = None
    seed: Optional[int] = None
    sensors: Dict[str, SensorStream]
    imu: str = IMU_FILE
    imu_rate: float = 200.0
    groundtruth: Optional[str] = None
    gravity: List[float] = Field([0.0, 0.0, -9.81], min_length=3, max_length=3)
    static_duration: float = 0.0
    extrinsics: Extrinsics
    groundtruth_extrinsics: Optional[Extrinsics] = None


# --- low-level codecs ---

def encode_scan(scan):
    rec = np.empty(len(scan), dtype=POINT_DTYPE)
    rec["t"] = scan.t
    rec["x"] = scan.xyz[:, 0]
    rec["y"] = scan.xyz[:, 1]
    rec["z"] = scan.xyz[:, 2]
    rec["ring"] = scan.ring
    return rec.tobytes()


def decode_scan(buf, sensor, t_start, t_end, path="<memory>"):
    if len(buf) % RECORD_SIZE:
        offset = len(buf) - len(buf) % RECORD_SIZE
        raise DatasetError(path, f"truncated point record ({len(buf) % RECORD_SIZE} of "
                                 f"{RECORD_SIZE} bytes)", offset=offset)
    rec = np.frombuffer(buf, dtype=POINT_DTYPE)
    xyz = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    return Scan(sensor, t_start, t_end, rec["t"].astype(np.float64), xyz, rec["ring"])


def write_csv(path, rows, header):
    rows = np.asarray(rows, dtype=np.float64).reshape(-1, header.count(",") + 1)
    try:
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=header, comments="")
    except OSError as e:
        raise DatasetError(path, f"cannot write: {e}") from e


def read_csv(path, header):
    ncols = header.count(",") + 1
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DatasetError(path, f"cannot read: {e.strerror or e}") from e
    if not lines or lines[0].strip() != header:
        raise DatasetError(path, f"expected header '{header}'", offset="line 1")
    body = [ln for ln in lines[1:] if ln.strip()]
    if not body:
        return np.empty((0, ncols))
    try:
        rows = np.loadtxt(body, delimiter=",", ndmin=2)
    except ValueError as e:
        raise DatasetError(path, f"corrupt row: {e}") from e
    if rows.shape[1] != ncols:
        raise DatasetError(path, f"expected {ncols} columns, got {rows.shape[1]}")
    return rows


def _check_monotone(path, t, what, strict=True):
    d = np.diff(t)
    bad = np.flatnonzero(d <= 0.0) if strict else np.flatnonzero(d < 0.0)
    if bad.size:
        # +2: header line and 1-based numbering
        raise DatasetError(path, f"{what} timestamps not monotone", offset=f"line {bad[0] + 3}")


# --- reader ---

class Dataset:
    """An opened dataset directory; scans are loaded on demand."""

    def __init__(self, root, manifest, imu, groundtruth):
        self.root = root
        self.manifest = manifest
        self.imu = imu
        self.groundtruth = groundtruth

    @property
    def sensors(self):
        return sorted(self.manifest.sensors)

    def model(self, sensor):
        return self.manifest.sensors[sensor].model

    def scan_count(self, sensor):
        stream = self.manifest.sensors.get(sensor)
        return 0 if stream is None else len(stream.scans)

    def scan_path(self, sensor, index):
        return os.path.join(self.root, self.manifest.sensors[sensor].scans[index].file)

    def load_scan(self, sensor, index):
        entry = self.manifest.sensors[sensor].scans[index]
        path = os.path.join(self.root, entry.file)
        try:
            with open(path, "rb") as f:
                buf = f.read()
        except OSError as e:
            raise DatasetError(path, f"cannot read scan: {e.strerror or e}") from e
        scan = decode_scan(buf, sensor, entry.t_start, entry.t_end, path)
        times = scan.t[~np.isnan(scan.t)]
        if times.size and (times.min() < entry.t_start - 1e-9 or times.max() > entry.t_end + 1e-9):
            bad = int(np.flatnonzero((scan.t < entry.t_start - 1e-9)
                                     | (scan.t > entry.t_end + 1e-9))[0])
            raise DatasetError(path, "point timestamp outside the sweep interval",
                               offset=bad * RECORD_SIZE)
        return scan

    def scans(self, sensor):
        for i in range(self.scan_count(sensor)):
            yield self.load_scan(sensor, i)

    @property
    def gravity(self):
        return np.array(self.manifest.gravity, dtype=np.float64)

    @property
    def T_h_to_i(self):
        return Pose.from_record(self.manifest.extrinsics.T_h_to_i)

    @property
    def T_v_to_h(self):
        rec = self.manifest.extrinsics.T_v_to_h
        return None if rec is None else Pose.from_record(rec)

    def groundtruth_extrinsics(self):
        ext = self.manifest.groundtruth_extrinsics
        if ext is None:
            return None
        return {name: Pose.from_record(rec) for name, rec in ext.model_dump().items()
                if rec is not None}

    def groundtruth_poses(self):
        if self.groundtruth is None:
            return None
        return self.groundtruth[:, 0], [Pose.from_record(r) for r in self.groundtruth[:, 1:]]


def read_manifest(root):
    path = os.path.join(root, MANIFEST)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = f.read()
    except OSError as e:
        raise DatasetError(path, f"cannot read manifest: {e.strerror or e}") from e
    try:
        return Manifest.model_validate_json(raw)
    except ValidationError as e:
        raise DatasetError(path, f"invalid manifest: {e.errors()[0]['msg']} "
                                 f"at {'.'.join(str(p) for p in e.errors()[0]['loc'])}") from e


def read_dataset(root):
    """Open and validate a dataset directory."""
    root = os.fspath(root)
    manifest = read_manifest(root)

    for sensor, stream in manifest.sensors.items():
        starts = [s.t_start for s in stream.scans]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise DatasetError(os.path.join(root, MANIFEST),
                               f"scan start times of sensor '{sensor}' not monotone")
        for entry in stream.scans:
            path = os.path.join(root, entry.file)
            try:
                size = os.path.getsize(path)
            except OSError:
                raise DatasetError(path, "scan file listed in manifest is missing") from None
            if size % RECORD_SIZE:
                raise DatasetError(path, "truncated point record",
                                   offset=size - size % RECORD_SIZE)
            if size // RECORD_SIZE != entry.points:
                raise DatasetError(path, f"holds {size // RECORD_SIZE} points, manifest "
                                         f"lists {entry.points}", offset=size)

    imu_path = os.path.join(root, manifest.imu)
    if not os.path.exists(imu_path):
        raise DatasetError(imu_path, "IMU file listed in manifest is missing")
    rows = read_csv(imu_path, IMU_HEADER)
    _check_monotone(imu_path, rows[:, 0], "IMU")
    imu = ImuSeries(rows[:, 0], rows[:, 1:4], rows[:, 4:7])

    groundtruth = None
    if manifest.groundtruth:
        gt_path = os.path.join(root, manifest.groundtruth)
        if not os.path.exists(gt_path):
            raise DatasetError(gt_path, "ground-truth file listed in manifest is missing")
        groundtruth = read_csv(gt_path, GROUNDTRUTH_HEADER)
        _check_monotone(gt_path, groundtruth[:, 0], "ground-truth")

    logger.info(
        f"Opened dataset {root}: "
        + ", ".join(f"{s}={len(st.scans)} scans" for s, st in sorted(manifest.sensors.items()))
        + f", {len(imu)} IMU samples"
    )
    return Dataset(root, manifest, imu, groundtruth)


def write_manifest(root, manifest):
    path = os.path.join(root, MANIFEST)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest.model_dump(mode="json"), f, indent=2)
    except OSError as e:
        raise DatasetError(path, f"cannot write manifest: {e.strerror or e}") from e
    return path
