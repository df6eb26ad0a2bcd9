# mmlio/pipeline/mapexport.py
"""Binary little-endian PLY export of the world feature map."""

import logging

import numpy as np

from mmlio.errors import DatasetError, RangeError

logger = logging.getLogger(__name__)

LABEL_EDGE = 1
LABEL_PLANE = 2

VERTEX_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("label", "u1")])

_HEADER = (
    "ply\n"
    "format binary_little_endian 1.0\n"
    "element vertex {n}\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "property uchar label\n"
    "end_header\n"
)


def export_map(points, labels, path):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    if len(points) == 0:
        raise RangeError("cannot export an empty map")
    if len(labels) != len(points):
        raise RangeError("one label per map point required")
    records = np.empty(len(points), dtype=VERTEX_DTYPE)
    records["x"], records["y"], records["z"] = points.T
    records["label"] = labels
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.format(n=len(points)).encode("ascii"))
            fh.write(records.tobytes())
    except OSError as exc:
        raise DatasetError(path, f"cannot write map: {exc.strerror or exc}") from exc
    logger.info(f"Exported {len(points)} map points to {path}")
    return path


def read_map(path):
    """(points (N, 3) float64, labels (N,) uint8) from an export_map file."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DatasetError(path, f"cannot read map: {exc.strerror or exc}") from exc
    marker = b"end_header\n"
    end = data.find(marker)
    if not data.startswith(b"ply\n") or end < 0:
        raise DatasetError(path, "not a PLY file", offset=0)
    header = data[:end].decode("ascii").splitlines()
    if "format binary_little_endian 1.0" not in header:
        raise DatasetError(path, "only binary little-endian PLY is supported")
    n = next((int(line.split()[2]) for line in header if line.startswith("element vertex")),
             None)
    if n is None:
        raise DatasetError(path, "missing vertex element")
    body = data[end + len(marker):]
    if len(body) < n * VERTEX_DTYPE.itemsize:
        raise DatasetError(path, f"truncated vertex data, {n} vertices declared",
                           offset=end + len(marker) + len(body))
    rec = np.frombuffer(body, dtype=VERTEX_DTYPE, count=n)
    points = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    return points, rec["label"].copy()
