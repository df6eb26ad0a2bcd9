# mmlio/posegraph/__init__.py
from mmlio.posegraph.graph import (
    LOOP, ODOMETRY, GraphEdge, GraphParams, PoseGraph, add_keyframe_node, default_information,
)
from mmlio.posegraph.loop import LoopParams, detect_loop, icp_align
from mmlio.posegraph.optimize import graph_cost, optimize_graph
from mmlio.posegraph.io import read_graph, write_graph

__all__ = [
    "LOOP", "ODOMETRY", "GraphEdge", "GraphParams", "PoseGraph", "add_keyframe_node",
    "default_information", "LoopParams", "detect_loop", "icp_align", "graph_cost",
    "optimize_graph", "read_graph", "write_graph",
]
