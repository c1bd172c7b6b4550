"""Routing metrics as executable objects, plus decision procedures for their
algebraic properties.

A metric is the five-tuple (M, W, met, mr, <) of Gouda and Schneider.  The
order is carried as a ranking function: ``a < b`` under the metric iff
``rank(a) < rank(b)``.  Infinite domains (the naturals for SP and BFS, the
real interval for R) are represented by a finite sampling window together
with a membership predicate, and every verdict computed over a window is
flagged as non-exhaustive.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from fractions import Fraction
from typing import Any, Callable, Iterable

__all__ = [
    "MetricError",
    "RoutingMetric",
    "MetricPropertyReport",
    "BUILTIN_NAMES",
    "builtin_metric",
    "table_metric",
    "check_properties",
    "utility_chain",
    "reachable_values",
    "non_monotonic_example",
    "two_fixed_point_example",
]

DEFAULT_WINDOW = 64
DEFAULT_DENOMINATOR = 16

BUILTIN_NAMES = ("SP", "F", "R", "NC", "BFS", "MET")


class MetricError(ValueError):
    """Raised for malformed metric definitions or unknown builtin names."""


def _is_nat(x: Any) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x >= 0


def _is_unit(x: Any) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool) and 0 <= x <= 1


@dataclass(frozen=True, eq=False)
class RoutingMetric:
    """An executable routing metric.

    ``values`` and ``weights`` are either the full enumeration of M and W or,
    when the matching ``*_exhaustive`` flag is false, a finite sample of a
    declared-infinite domain whose membership is decided by ``value_member``
    / ``weight_member``.
    """

    name: str
    values: tuple
    weights: tuple
    met: Callable[[Any, Any], Any]
    mr: Any
    rank: Callable[[Any], Any]
    values_exhaustive: bool = True
    weights_exhaustive: bool = True
    value_member: Callable[[Any], bool] | None = None
    weight_member: Callable[[Any], bool] | None = None
    order: str = "asc"
    definition: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.values or not self.weights:
            raise MetricError(f"{self.name}: empty value or weight domain")
        if self.mr not in self.values:
            raise MetricError(f"{self.name}: mr={self.mr!r} is not in M")
        top = self.rank(self.mr)
        for m in self.values:
            if self.rank(m) > top:
                raise MetricError(f"{self.name}: mr is not maximal, {m!r} is above it")
        for m in self.values:
            for w in self.weights:
                out = self.met(m, w)
                if not self.is_value(out):
                    raise MetricError(f"{self.name}: met({m!r}, {w!r}) = {out!r} is outside M")
        missing = set(self.values) - reachable_values(self)
        if missing:
            raise MetricError(
                f"{self.name}: utility condition fails for {sorted(missing, key=self.rank)!r}"
            )

    # order helpers -----------------------------------------------------

    def less(self, a: Any, b: Any) -> bool:
        return self.rank(a) < self.rank(b)

    def leq(self, a: Any, b: Any) -> bool:
        return self.rank(a) <= self.rank(b)

    def best(self, items: Iterable[Any]) -> Any:
        """The maximum under the metric order; the first one wins ties."""
        it = iter(items)
        try:
            top = next(it)
        except StopIteration:
            raise ValueError("best() of an empty sequence") from None
        top_rank = self.rank(top)
        for x in it:
            r = self.rank(x)
            if r > top_rank:
                top, top_rank = x, r
        return top

    def is_value(self, m: Any) -> bool:
        if self.values_exhaustive:
            return m in self._value_set
        return self.value_member(m) if self.value_member else m in self._value_set

    def is_weight(self, w: Any) -> bool:
        if self.weights_exhaustive:
            return w in self._weight_set
        return self.weight_member(w) if self.weight_member else w in self._weight_set

    @property
    def domain_exhaustive(self) -> bool:
        return self.values_exhaustive and self.weights_exhaustive

    @cached_property
    def _value_set(self) -> frozenset:
        return frozenset(self.values)

    @cached_property
    def _weight_set(self) -> frozenset:
        return frozenset(self.weights)

    def sorted_values(self) -> list:
        """Sampled values from the order-least to mr."""
        return sorted(self.values, key=self.rank)

    def __repr__(self) -> str:
        return f"RoutingMetric({self.name!r})"


# ---------------------------------------------------------------------------
# builtins


def _sp(window: int) -> RoutingMetric:
    sample = tuple(range(window + 1))
    return RoutingMetric(
        name="SP",
        values=sample,
        weights=sample,
        met=lambda m, w: m + w,
        mr=0,
        rank=lambda m: -m,
        values_exhaustive=False,
        weights_exhaustive=False,
        value_member=_is_nat,
        weight_member=_is_nat,
        order="desc",
        definition={"kind": "builtin", "name": "SP", "window": window},
    )


def _bfs(window: int) -> RoutingMetric:
    return RoutingMetric(
        name="BFS",
        values=tuple(range(window + 1)),
        weights=(1,),
        met=lambda m, w: m + w,
        mr=0,
        rank=lambda m: -m,
        values_exhaustive=False,
        weights_exhaustive=True,
        value_member=_is_nat,
        order="desc",
        definition={"kind": "builtin", "name": "BFS", "window": window},
    )


def _flow(mr: int) -> RoutingMetric:
    if not _is_nat(mr):
        raise MetricError(f"F needs a finite mr >= 0, got {mr!r}")
    dom = tuple(range(mr + 1))
    return RoutingMetric(
        name=f"F({mr})",
        values=dom,
        weights=dom,
        met=min,
        mr=mr,
        rank=lambda m: m,
        definition={"kind": "builtin", "name": "F", "mr": mr},
    )


def _unit_grid(denominator: int) -> tuple:
    return tuple(sorted({Fraction(p, q) for q in range(1, denominator + 1) for p in range(q + 1)}))


@lru_cache(maxsize=1 << 16)
def _fraction_product(m: Fraction, w: Fraction) -> Fraction:
    # Fraction arithmetic dominates simulations over R; the grid is small
    return m * w


def _reliability(denominator: int) -> RoutingMetric:
    grid = _unit_grid(denominator)
    return RoutingMetric(
        name="R",
        values=grid,
        weights=grid,
        met=_fraction_product,
        mr=Fraction(1),
        rank=lambda m: m,
        values_exhaustive=False,
        weights_exhaustive=False,
        value_member=_is_unit,
        weight_member=_is_unit,
        definition={"kind": "builtin", "name": "R", "denominator": denominator},
    )


def _nc() -> RoutingMetric:
    return RoutingMetric(
        name="NC",
        values=(0,),
        weights=(0,),
        met=lambda m, w: 0,
        mr=0,
        rank=lambda m: m,
        definition={"kind": "builtin", "name": "NC"},
    )


def _met() -> RoutingMetric:
    return RoutingMetric(
        name="MET",
        values=(0, 1, 2, 3),
        weights=(1,),
        met=lambda m, w: max(0, m - w),
        mr=3,
        rank=lambda m: m,
        definition={"kind": "builtin", "name": "MET"},
    )


_F_PATTERN = re.compile(r"^F\s*\(\s*(\d+)\s*\)$")


def builtin_metric(
    name: str,
    mr: int | None = None,
    *,
    window: int = DEFAULT_WINDOW,
    denominator: int = DEFAULT_DENOMINATOR,
) -> RoutingMetric:
    """Return one of the tabulated metrics SP, F(mr), R, NC, BFS or MET.

    ``name`` may also be written ``"F(10)"``.  ``window`` bounds the sampled
    naturals for SP and BFS; ``denominator`` bounds the rational grid for R.
    """
    key = name.strip().upper()
    match = _F_PATTERN.match(key)
    if match:
        key, mr = "F", int(match.group(1))
    if key == "SP":
        return _sp(window)
    if key == "BFS":
        return _bfs(window)
    if key == "F":
        if mr is None:
            raise MetricError("F needs a finite mr >= 0")
        return _flow(mr)
    if key == "R":
        return _reliability(denominator)
    if key == "NC":
        return _nc()
    if key == "MET":
        return _met()
    raise MetricError(f"unknown metric {name!r}; expected one of {', '.join(BUILTIN_NAMES)}")


def table_metric(
    name: str,
    values: Iterable[Any],
    weights: Iterable[Any],
    table: Iterable[Iterable[Any]],
    mr: Any,
    order: str = "asc",
) -> RoutingMetric:
    """A fully enumerated metric given by its met table.

    ``table[i][j]`` is ``met(values[i], weights[j])``.  The order is read off
    the listing: with ``"asc"`` the values are listed from least to greatest,
    with ``"desc"`` from greatest to least.
    """
    vals = tuple(values)
    ws = tuple(weights)
    rows = [tuple(r) for r in table]
    if len(set(vals)) != len(vals) or len(set(ws)) != len(ws):
        raise MetricError(f"{name}: duplicate values or weights")
    if order not in ("asc", "desc"):
        raise MetricError(f"{name}: order must be 'asc' or 'desc', got {order!r}")
    if len(rows) != len(vals) or any(len(r) != len(ws) for r in rows):
        raise MetricError(f"{name}: met table must be {len(vals)}x{len(ws)}")
    pos = {v: i for i, v in enumerate(vals)}
    lookup = {(vals[i], ws[j]): rows[i][j] for i in range(len(vals)) for j in range(len(ws))}
    for out in lookup.values():
        if out not in pos:
            raise MetricError(f"{name}: table entry {out!r} is not a listed value")
    sign = 1 if order == "asc" else -1

    def met(m: Any, w: Any) -> Any:
        try:
            return lookup[(m, w)]
        except KeyError:
            raise MetricError(f"{name}: met({m!r}, {w!r}) is undefined") from None

    return RoutingMetric(
        name=name,
        values=vals,
        weights=ws,
        met=met,
        mr=mr,
        rank=lambda m: sign * pos[m],
        order=order,
        definition={
            "kind": "table",
            "name": name,
            "values": list(vals),
            "weights": list(ws),
            "met": [list(r) for r in rows],
            "mr": mr,
            "order": order,
        },
    )


def non_monotonic_example() -> RoutingMetric:
    """Bounded but not monotonic: met(1,a)=1 sits above met(2,a)=0.

    Weight ``c`` makes 1 reachable from mr=2; without it the value 1 would
    violate the utility condition and the metric restricted to {0, 2} would
    be monotonic after all.
    """
    return table_metric(
        "nonmono",
        values=[0, 1, 2],
        weights=["a", "b", "c"],
        table=[
            [0, 0, 0],
            [1, 1, 1],
            [0, 2, 1],
        ],
        mr=2,
    )


def two_fixed_point_example() -> RoutingMetric:
    """Strictly decreasing with fixed points 0 and 1 (and not monotonic)."""
    values = [0, 1, 2, 3]
    weights = [1, 2]

    def f(m: int, w: int) -> int:
        return 1 if m == 1 else max(m - w, 0)

    return table_metric(
        "twofix", values, weights, [[f(m, w) for w in weights] for m in values], mr=3
    )


# ---------------------------------------------------------------------------
# properties


def reachable_values(metric: RoutingMetric) -> set:
    """Sampled values reachable from mr by met-chains that stay in the sample."""
    sample = set(metric.values)
    seen = {metric.mr}
    queue = deque([metric.mr])
    while queue:
        m = queue.popleft()
        for w in metric.weights:
            nxt = metric.met(m, w)
            if nxt in sample and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def utility_chain(metric: RoutingMetric, target: Any) -> tuple[list, list] | None:
    """Shortest chain mr = m_0, ..., m_k = target with m_i = met(m_{i-1}, w_{i-1}).

    Returns ``(values, weights)`` or None when ``target`` cannot be reached
    inside the sample.  Shortest chains are strictly decreasing whenever the
    metric is bounded.
    """
    sample = set(metric.values)
    parent: dict[Any, tuple[Any, Any] | None] = {metric.mr: None}
    queue = deque([metric.mr])
    while queue and target not in parent:
        m = queue.popleft()
        for w in metric.weights:
            nxt = metric.met(m, w)
            if nxt in sample and nxt not in parent:
                parent[nxt] = (m, w)
                queue.append(nxt)
    if target not in parent:
        return None
    values, weights = [target], []
    while parent[values[-1]] is not None:
        prev, w = parent[values[-1]]
        values.append(prev)
        weights.append(w)
    values.reverse()
    weights.reverse()
    return values, weights


@dataclass(frozen=True)
class MetricPropertyReport:
    bounded: bool
    monotonic: bool
    maximizable: bool
    strictly_decreasing: bool
    fixed_points: frozenset
    strongly_maximizable: bool
    domain_exhaustive: bool
    utility: bool
    witnesses: dict = field(default_factory=dict, compare=False)

    def to_dict(self, encode: Callable[[Any], Any] = lambda x: x) -> dict:
        return {
            "bounded": self.bounded,
            "monotonic": self.monotonic,
            "maximizable": self.maximizable,
            "strictly_decreasing": self.strictly_decreasing,
            "fixed_points": sorted((encode(x) for x in self.fixed_points), key=str),
            "strongly_maximizable": self.strongly_maximizable,
            "domain_exhaustive": self.domain_exhaustive,
            "utility": self.utility,
            "witnesses": {k: [encode(x) for x in v] for k, v in self.witnesses.items()},
        }


def check_properties(metric: RoutingMetric) -> MetricPropertyReport:
    """Decide every metric property by exhaustive check over M x W (or the window).

    Monotonicity only needs adjacent pairs of the sorted value list, by
    transitivity of the order.
    """
    cached = metric.__dict__.get("_property_report")
    if cached is not None:
        return cached

    witnesses: dict[str, tuple] = {}
    ordered = metric.sorted_values()
    rank = metric.rank

    bounded = True
    strictly = True
    fixed = set()
    for m in ordered:
        outs = [metric.met(m, w) for w in metric.weights]
        for w, out in zip(metric.weights, outs):
            if bounded and rank(out) > rank(m):
                bounded = False
                witnesses["unbounded"] = (m, w, out)
        if all(out == m for out in outs):
            fixed.add(m)
        elif not all(rank(out) < rank(m) for out in outs):
            if strictly:
                witnesses["not_strictly_decreasing"] = (m,)
            strictly = False

    monotonic = True
    for w in metric.weights:
        images = [metric.met(m, w) for m in ordered]
        for i in range(len(ordered) - 1):
            if rank(images[i]) > rank(images[i + 1]):
                monotonic = False
                witnesses["non_monotonic"] = (ordered[i], ordered[i + 1], w)
                break
        if not monotonic:
            break

    maximizable = bounded and monotonic
    many = len(metric.values) >= 2 or not metric.values_exhaustive
    strong = maximizable and ((not many) or (strictly and len(fixed) == 1))
    report = MetricPropertyReport(
        bounded=bounded,
        monotonic=monotonic,
        maximizable=maximizable,
        strictly_decreasing=strictly,
        fixed_points=frozenset(fixed),
        strongly_maximizable=strong,
        domain_exhaustive=metric.domain_exhaustive,
        utility=reachable_values(metric) >= set(metric.values),
        witnesses=witnesses,
    )
    metric.__dict__["_property_report"] = report
    return report
