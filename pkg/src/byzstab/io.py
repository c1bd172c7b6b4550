"""JSON encodings for metrics, graphs and reports.

Rational values are written as ``"p/q"`` strings so that files stay exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .metrics import MetricError, RoutingMetric, builtin_metric, table_metric
from .system import WeightedSystem, build_system

__all__ = [
    "InputError",
    "encode_value",
    "decode_value",
    "metric_to_dict",
    "metric_from_dict",
    "load_metric",
    "system_to_dict",
    "system_from_dict",
    "load_system",
    "dumps",
]

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Unreadable or malformed input file."""


def encode_value(x: Any) -> Any:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return x


def decode_value(metric: RoutingMetric, x: Any) -> Any:
    if isinstance(x, list):
        x = tuple(x)
    if isinstance(x, str) and not metric.is_value(x) and not metric.is_weight(x):
        try:
            return Fraction(x)
        except ValueError:
            return x
    return x


def metric_to_dict(metric: RoutingMetric) -> dict:
    d = dict(metric.definition)
    if d.get("kind") == "table":
        d["values"] = [encode_value(v) for v in d["values"]]
        d["weights"] = [encode_value(w) for w in d["weights"]]
        d["met"] = [[encode_value(x) for x in row] for row in d["met"]]
        d["mr"] = encode_value(d["mr"])
    return d


def metric_from_dict(d: Mapping[str, Any]) -> RoutingMetric:
    try:
        kind = d.get("kind", "builtin")
        if kind == "builtin":
            kwargs = {k: int(d[k]) for k in ("window", "denominator") if k in d}
            return builtin_metric(str(d["name"]), d.get("mr"), **kwargs)
        if kind == "table":
            return table_metric(
                str(d.get("name", "table")),
                d["values"],
                d["weights"],
                d["met"],
                d["mr"],
                d.get("order", "asc"),
            )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed metric definition: {exc!r}") from exc
    raise InputError(f"unknown metric kind {kind!r}")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def load_metric(spec: str | Mapping[str, Any], base: Path | None = None) -> RoutingMetric:
    """A builtin name such as ``"F(10)"``, a metric dict, or a path to a metric file."""
    try:
        if isinstance(spec, Mapping):
            return metric_from_dict(spec)
        path = Path(spec) if base is None else base / spec
        if path.suffix == ".json" or path.exists():
            data = _read_json(path)
            if not isinstance(data, Mapping):
                raise InputError(f"{path}: a metric file must hold a JSON object")
            return metric_from_dict(data)
        return builtin_metric(spec)
    except MetricError as exc:
        raise InputError(str(exc)) from exc


def system_to_dict(system: WeightedSystem) -> dict:
    names = system.names
    return {
        "metric": metric_to_dict(system.metric),
        "nodes": list(names),
        "root": names[system.root],
        "byzantine": [names[b] for b in sorted(system.byzantine)],
        "edges": [[names[u], names[v], encode_value(system.weight(u, v))] for u, v in system.edges],
    }


def system_from_dict(d: Mapping[str, Any], base: Path | None = None) -> WeightedSystem:
    from .system import SystemError_

    try:
        metric = load_metric(d["metric"], base)
        edges = [(a, b, decode_value(metric, w)) for a, b, w in d["edges"]]
        return build_system(d["nodes"], edges, metric, d.get("root", d["nodes"][0]), d.get("byzantine", []))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        if isinstance(exc, SystemError_):
            raise InputError(str(exc)) from exc
        raise InputError(f"malformed graph description: {exc!r}") from exc


def load_system(path: str | Path) -> WeightedSystem:
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, Mapping):
        raise InputError(f"{path}: a graph file must hold a JSON object")
    return system_from_dict(data, path.parent)


def dumps(obj: Any) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=encode_value) + "\n"
