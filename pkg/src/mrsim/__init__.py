"""Memory-bound MapReduce simulation: engine, random indexing, BSP and CRCW PRAM simulations, applications."""

from .engine import Enforcement, KeyedItem, RoundConfig, RunMetrics, estimate_time, run_pipeline, run_round

__version__ = "0.1.0"

__all__ = [
    "Enforcement",
    "KeyedItem",
    "RoundConfig",
    "RunMetrics",
    "estimate_time",
    "run_pipeline",
    "run_round",
]
