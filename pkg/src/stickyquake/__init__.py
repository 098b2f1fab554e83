"""Reflected, sticky and non-local boundary diffusions on metric graphs,
with an earthquake catalog model driven by them."""
from .errors import ConfigError, DomainError, QuadratureError, SingularityError
from .region import Region
from .graph import Network, StarGraph, WaveOptions, build_k_ary_network, single_star
from .harness import OracleReport
from .rdbm import RdbmParams, simulate_path
from .boundary import EdgeProcessParams, VertexProcessParams, simulate_edge, simulate_vertex
from .quake import Catalog, EventRecord, run_waves, simulate_catalogs, simulate_quake

__version__ = "0.1.0"

__all__ = [
    "Catalog", "ConfigError", "DomainError", "EdgeProcessParams", "EventRecord", "Network",
    "OracleReport", "QuadratureError", "RdbmParams", "Region", "SingularityError", "StarGraph",
    "VertexProcessParams", "WaveOptions", "build_k_ary_network", "run_waves", "simulate_catalogs",
    "simulate_edge", "simulate_path", "simulate_quake", "simulate_vertex", "single_star",
]
