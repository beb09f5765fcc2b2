"""Betweenness centrality approximation and a reproducible benchmarking pipeline."""

from .centrality import (
    CentralityEstimate,
    KadabraParams,
    brandes_exact,
    kadabra,
    rk,
    top_k,
)
from .graph import Graph, estimate_diameter, largest_component, load_edge_list, read_edge_list
from .runfile import RunOutput, parse_run_output, write_run_output

__all__ = [
    "CentralityEstimate",
    "Graph",
    "KadabraParams",
    "RunOutput",
    "brandes_exact",
    "estimate_diameter",
    "kadabra",
    "largest_component",
    "load_edge_list",
    "parse_run_output",
    "read_edge_list",
    "rk",
    "top_k",
    "write_run_output",
]

__version__ = "0.1.0"
