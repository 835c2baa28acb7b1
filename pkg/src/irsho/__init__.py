"""Handover metrics for cellular users served through reflecting surfaces."""
from .baseline import BaselineMetrics, run_baseline
from .config import ConfigError, NetworkConfig, QuadratureSettings, load_config
from .ho_engine import HoMetrics, analyze_grid, run_analysis
from .kernels import BACKEND
from .mc_sim import McEstimate, simulate_full_topology, simulate_matched
from .scenario import build_geometry, geometry_for

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BaselineMetrics",
    "ConfigError",
    "HoMetrics",
    "McEstimate",
    "NetworkConfig",
    "QuadratureSettings",
    "analyze_grid",
    "build_geometry",
    "geometry_for",
    "load_config",
    "run_analysis",
    "run_baseline",
    "simulate_full_topology",
    "simulate_matched",
]
