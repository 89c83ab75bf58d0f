"""Coded caching over combination networks: exact converse bounds and delivery schemes."""

from __future__ import annotations

from .bounds import BoundResult, compute_bound, cutset_bound
from .closedforms import LoadCurve, load_thm6, thm7_curve, thm8_low_memory
from .delivery import DeliveryPlan, max_link_load, plan_general, simulate_decode
from .elimination import group_divide, plan_elimination, solve_coding_matrix
from .exactmath import ParameterError
from .indexgraph import DemandVector
from .placement import PlacementSpec, man_placement
from .topology import Topology, build_topology

__all__ = [
    "BoundResult", "DeliveryPlan", "DemandVector", "LoadCurve", "ParameterError",
    "PlacementSpec", "Topology", "build_topology", "compute_bound", "cutset_bound",
    "group_divide", "load_thm6", "man_placement", "max_link_load", "plan_elimination",
    "plan_general", "simulate_decode", "solve_coding_matrix", "thm7_curve", "thm8_low_memory",
]
