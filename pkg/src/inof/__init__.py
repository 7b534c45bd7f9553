"""Ising network opinion formation: majority-vote Monte Carlo on directed graphs."""

__version__ = "0.1.0"

from .graph import DirectedGraph, VoteMode, build_graph, load_edge_list, read_graph  # noqa: E402
from .dynamics import (  # noqa: E402
    Color,
    SeedAssignment,
    SimConfig,
    run_ensemble,
    run_pass,
    run_realization,
)
from .netgen import GenModel, GenSpec, generate  # noqa: E402

__all__ = [
    "Color",
    "DirectedGraph",
    "GenModel",
    "GenSpec",
    "SeedAssignment",
    "SimConfig",
    "VoteMode",
    "build_graph",
    "generate",
    "load_edge_list",
    "read_graph",
    "run_ensemble",
    "run_pass",
    "run_realization",
]
