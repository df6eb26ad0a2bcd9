# mmlio/posegraph/io.py
"""
Plain-text graph export:

    NODE id tx ty tz qw qx qy qz
    EDGE i j tx ty tz qw qx qy qz <21 upper-triangular information values>

Information values are row-major over the (rotation, translation) order.
"""

import logging

import numpy as np

from mmlio.errors import DatasetError
from mmlio.geom import Pose
from mmlio.posegraph.graph import LOOP, ODOMETRY, PoseGraph

logger = logging.getLogger(__name__)

_UPPER = np.triu_indices(6)


def _fmt(values):
    return " ".join(f"{v:.17g}" for v in values)


def write_graph(graph, path, poses=None):
    poses = graph.nodes if poses is None else poses
    lines = [f"NODE {n} {_fmt(poses[n].as_record())}" for n in graph.nodes]
    for e in graph.edges:
        lines.append(f"EDGE {e.i} {e.j} {_fmt(e.measurement.as_record())} "
                     f"{_fmt(e.information[_UPPER])}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise DatasetError(path, f"cannot write pose graph: {exc}") from exc
    logger.info(f"Wrote pose graph with {len(graph.nodes)} nodes to {path}")


def read_graph(path):
    """Inverse of write_graph; edges between consecutive nodes read back as odometry."""
    graph = PoseGraph()
    pending = []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DatasetError(path, f"cannot read pose graph: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "NODE" and len(parts) == 9:
                graph.add_node(int(parts[1]), Pose.from_record(parts[2:9]))
            elif parts[0] == "EDGE" and len(parts) == 31:
                info = np.zeros((6, 6))
                info[_UPPER] = [float(v) for v in parts[10:31]]
                info = info + np.triu(info, 1).T
                pending.append((lineno, int(parts[1]), int(parts[2]),
                                Pose.from_record(parts[3:10]), info))
            else:
                raise ValueError(f"unrecognized record '{parts[0]}' with {len(parts)} fields")
        except (ValueError, KeyError) as exc:
            raise DatasetError(path, str(exc), offset=f"line {lineno}") from exc
    order = {n: k for k, n in enumerate(graph.nodes)}
    for lineno, i, j, T, info in pending:
        kind = ODOMETRY if order.get(j, -1) - order.get(i, -2) == 1 else LOOP
        try:
            graph.add_edge(i, j, T, info, kind)
        except (ValueError, KeyError) as exc:
            raise DatasetError(path, str(exc), offset=f"line {lineno}") from exc
    return graph
