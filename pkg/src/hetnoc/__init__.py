"""Analytical models and a flit-level simulator for NoCs in heterogeneous 3D SoCs."""

from .topology import (
    Address,
    Direction,
    LayerSpec,
    Position,
    StackConfig,
    TechnologyNode,
    TopologyGraph,
    TopologyError,
    build_topology,
    hop_distance,
)
from .routing import R1, R2, XYZ, RoutingAlgorithm, route_r1, route_r2, route_xyz
from .sim import RouterConfig, SimParams, SimReport, run

__all__ = [
    "Address",
    "Direction",
    "LayerSpec",
    "Position",
    "StackConfig",
    "TechnologyNode",
    "TopologyGraph",
    "TopologyError",
    "build_topology",
    "hop_distance",
    "R1",
    "R2",
    "XYZ",
    "RoutingAlgorithm",
    "route_r1",
    "route_r2",
    "route_xyz",
    "RouterConfig",
    "SimParams",
    "SimReport",
    "run",
]

__version__ = "0.1.0"
