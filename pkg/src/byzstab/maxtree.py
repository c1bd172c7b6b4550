"""Brute-force search for maximum metric trees.

A maximum metric tree is a spanning tree rooted at r in which the tree path
of every process is a maximum metric path, i.e. reaches mu(v, r).  A metric
is maximizable when every assigned system admits one; sampling random
systems and enumerating their spanning trees gives an empirical verdict.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Any

from .metrics import RoutingMetric
from .oracle import mu_brute_force_from
from .system import WeightedSystem, random_system

__all__ = [
    "EnumerationBudgetExceeded",
    "MaximizabilityResult",
    "find_maximum_metric_tree",
    "grow_maximum_metric_tree",
    "brute_force_maximizable",
]

DEFAULT_TREE_BUDGET = 2_000_000


class EnumerationBudgetExceeded(RuntimeError):
    """More partial parent assignments than the budget allows."""


def find_maximum_metric_tree(
    system: WeightedSystem, budget: int = DEFAULT_TREE_BUDGET
) -> dict[int, int] | None:
    """Enumerate parent assignments (each spanning tree once) until one is a
    maximum metric tree; return it as ``{child: parent}`` or None.

    A partial assignment is abandoned as soon as an assigned process whose
    path to r is already complete misses its maximum, or a pointer cycle
    appears.
    """
    metric = system.metric
    best = mu_brute_force_from(system, system.root)
    order = [v for v in system.processes if v != system.root]
    parent: dict[int, int] = {}
    visited = 0

    def path_value(v: int) -> tuple[bool, Any]:
        # (complete, value) following assigned parents; raises on cycles
        chain = []
        seen = set()
        cur = v
        while cur != system.root:
            if cur in seen:
                raise _Cycle
            seen.add(cur)
            if cur not in parent:
                return False, None
            chain.append(cur)
            cur = parent[cur]
        level = metric.mr
        for x in reversed(chain):
            level = metric.met(level, system.weight(x, parent[x]))
        return True, level

    def consistent() -> bool:
        for v in parent:
            try:
                done, level = path_value(v)
            except _Cycle:
                return False
            if done and level != best[v]:
                return False
        return True

    def assign(i: int) -> bool:
        nonlocal visited
        if i == len(order):
            return True
        v = order[i]
        for p in system.neighbors[v]:
            visited += 1
            if visited > budget:
                raise EnumerationBudgetExceeded(f"more than {budget} partial trees")
            parent[v] = p
            if consistent() and assign(i + 1):
                return True
            del parent[v]
        return False

    return dict(parent) if assign(0) else None


class _Cycle(Exception):
    pass


def grow_maximum_metric_tree(system: WeightedSystem) -> dict[int, int] | None:
    """Polynomial cross-check: attach processes one at a time to an already
    attached neighbour that gives them exactly mu(v, r).

    Attaching a process never blocks another, so this succeeds iff a
    maximum metric tree exists.
    """
    metric = system.metric
    best = mu_brute_force_from(system, system.root)
    value = {system.root: metric.mr}
    parent: dict[int, int] = {}
    grew = True
    while grew:
        grew = False
        for v in system.processes:
            if v in value:
                continue
            for p in system.neighbors[v]:
                if p in value and metric.met(value[p], system.weight(v, p)) == best[v]:
                    value[v] = best[v]
                    parent[v] = p
                    grew = True
                    break
    return parent if len(value) == system.n else None


@dataclass(frozen=True)
class MaximizabilityResult:
    maximizable: bool
    trials: int
    counterexample: WeightedSystem | None = None

    def __bool__(self) -> bool:
        return self.maximizable


def brute_force_maximizable(
    metric: RoutingMetric,
    max_nodes: int = 6,
    trials: int = 50,
    rng_seed: Any = 0,
    budget: int = DEFAULT_TREE_BUDGET,
) -> MaximizabilityResult:
    """Empirical maximizability: every sampled system must admit a maximum metric tree.

    Systems have 2..``max_nodes`` processes, no Byzantine process, and weights
    drawn from the metric's weight sample.  The first failing system is
    returned as the counterexample.
    """
    if not 2 <= max_nodes <= 8:
        raise ValueError("max_nodes must be between 2 and 8")
    rng = random.Random(f"{rng_seed}:maxtree")
    for t in range(trials):
        system = random_system(metric, rng.randint(2, max_nodes), rng)
        if find_maximum_metric_tree(system, budget) is None:
            return MaximizabilityResult(False, t + 1, system)
    return MaximizabilityResult(True, trials)
