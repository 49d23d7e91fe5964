"""Online branch-aware Steiner tree routing for dynamic multicast groups."""

from obsta.cost import CostKnobs, SlotLedger
from obsta.engine import EngineOptions, InvariantViolation, Obsta
from obsta.graph import Graph, global_spt
from obsta.scenario import Scenario, toy_example
from obsta.tree import MulticastTree

__all__ = [
    "CostKnobs",
    "EngineOptions",
    "Graph",
    "InvariantViolation",
    "MulticastTree",
    "Obsta",
    "Scenario",
    "SlotLedger",
    "toy_example",
    "global_spt",
]
