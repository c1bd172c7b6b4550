"""The maximum-metric tree protocol as a single guarded action per process.

Each correct process repeatedly adopts the neighbour offering the best
``met(level_u, w_vu)``.  The default variant adds a hop counter bounded by
``n``: a neighbour whose counter has reached the bound is not a candidate,
which flushes stale values circulating on pointer cycles and plateaus
where ``met(m, w) == m``.  ``TreeProtocol(hop_bounded=False)`` is the bare
greedy rule, kept for comparison; it can stall on such plateaus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .metrics import RoutingMetric
from .system import Configuration, ProcessState, WeightedSystem

__all__ = ["NeighborView", "ProcessView", "TreeProtocol", "local_rule", "is_enabled", "view_of"]


@dataclass(frozen=True, slots=True)
class NeighborView:
    label: int
    level: Any
    weight: Any
    hops: int = 0


@dataclass(frozen=True, slots=True)
class ProcessView:
    """Everything a process may read: its own state and its neighbours'."""

    state: ProcessState
    neighbors: tuple[NeighborView, ...]
    is_root: bool


@dataclass(frozen=True)
class TreeProtocol:
    hop_bounded: bool = True
    sticky: bool = True

    def bound(self, system: WeightedSystem) -> int | None:
        return system.n if self.hop_bounded else None

    def rule(self, system: WeightedSystem, config: Configuration, v: int) -> ProcessState:
        return local_rule(
            system.metric, view_of(system, config, v), self.bound(system), self.sticky
        )

    def enabled(self, system: WeightedSystem, config: Configuration, v: int) -> bool:
        return self.rule(system, config, v) != config[v]

    def enabled_output(self, system: WeightedSystem, config: Configuration, v: int) -> bool:
        """Whether executing the rule would change ``prnt`` or ``level``."""
        return not self.rule(system, config, v).same_output(config[v])


def view_of(system: WeightedSystem, config: Configuration, v: int) -> ProcessView:
    nbrs = tuple(
        NeighborView(i, config[u].level, system.weight(v, u), config[u].hops)
        for i, u in enumerate(system.neighbors[v])
    )
    return ProcessView(config[v], nbrs, v == system.root)


def local_rule(
    metric: RoutingMetric,
    view: ProcessView,
    hop_bound: int | None = None,
    sticky: bool = True,
) -> ProcessState:
    """The state a process moves to when activated.

    Without a hop bound this is the plain rule: the best offered value, with
    the lowest maximizing label as parent.  With ``hop_bound=D`` only
    neighbours with ``hops < D`` are candidates, the current parent is kept
    when it still offers the best value (if ``sticky``), and ``hops`` becomes
    the parent's counter plus one, capped at D.
    """
    if view.is_root:
        return ProcessState(None, metric.mr, 0)
    rank = metric.rank
    cands = view.neighbors
    if hop_bound is not None:
        cands = tuple(nb for nb in cands if nb.hops < hop_bound)
        if not cands:
            s = view.state
            return ProcessState(s.prnt, s.level, hop_bound)
    offers = [(metric.met(nb.level, nb.weight), nb) for nb in cands]
    top = max(rank(val) for val, _ in offers)
    tied = [(val, nb) for val, nb in offers if rank(val) == top]
    choice = tied[0]
    if sticky and hop_bound is not None:
        for val, nb in tied:
            if nb.label == view.state.prnt:
                choice = (val, nb)
                break
    level, parent = choice
    hops = 0 if hop_bound is None else min(parent.hops + 1, hop_bound)
    return ProcessState(parent.label, level, hops)


def is_enabled(
    metric: RoutingMetric, view: ProcessView, hop_bound: int | None = None, sticky: bool = True
) -> bool:
    return local_rule(metric, view, hop_bound, sticky) != view.state
