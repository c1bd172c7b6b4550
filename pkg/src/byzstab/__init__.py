"""Simulation and analysis of maximum-metric spanning-tree protocols under Byzantine faults."""

__version__ = "0.1.0"

from .metrics import (  # noqa: E402
    MetricPropertyReport,
    RoutingMetric,
    builtin_metric,
    check_properties,
    table_metric,
)
from .system import Configuration, ProcessState, WeightedSystem, build_system  # noqa: E402

__all__ = [
    "__version__",
    "RoutingMetric",
    "MetricPropertyReport",
    "builtin_metric",
    "table_metric",
    "check_properties",
    "WeightedSystem",
    "ProcessState",
    "Configuration",
    "build_system",
]
