"""Maximum metric values by global computation.

``mu(system, u, v)`` is the best metric ``u`` can obtain when ``v`` acts as
a root at level mr.  For bounded and monotonic metrics a best-first
relaxation ordered by the metric is exact; otherwise every simple path is
enumerated.

Paths never pass *through* a designated root (r or a Byzantine process)
other than their source: such a process roots its own tree, so it can end a
path but not relay one.  A process that the source can only reach through
another designated root falls back to the unrestricted path maximum.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Any, Callable

from .metrics import check_properties
from .system import WeightedSystem

__all__ = [
    "OracleBudgetExceeded",
    "unreachable_last",
    "mu",
    "mu_from",
    "mu_brute_force",
    "mu_brute_force_from",
    "MuTable",
    "mu_table",
    "reference_forest",
]

DEFAULT_PATH_BUDGET = 2_000_000


class OracleBudgetExceeded(RuntimeError):
    """Path enumeration needed more extensions than the configured budget."""


def unreachable_last(metric) -> Callable[[Any], tuple]:
    """Sort key ranking ``None`` (no admissible path) below every value."""
    rank = metric.rank
    return lambda x: (0,) if x is None else (1, rank(x))


def _relays(system: WeightedSystem, src: int, restricted: bool = True) -> list[bool]:
    blocked = {system.root, *system.byzantine} - {src} if restricted else set()
    return [v not in blocked for v in system.processes]


def _with_fallback(solve: Callable[[bool], list]) -> list:
    best = solve(True)
    if None in best:
        loose = solve(False)
        best = [x if x is not None else y for x, y in zip(best, loose)]
    return best


def _dijkstra(system: WeightedSystem, src: int, start: Any) -> list:
    return _with_fallback(lambda restricted: _dijkstra_pass(system, src, start, restricted))


def _dijkstra_pass(system: WeightedSystem, src: int, start: Any, restricted: bool) -> list:
    metric = system.metric
    relays = _relays(system, src, restricted)
    rank = metric.rank
    best: list = [None] * system.n
    best[src] = start
    done = [False] * system.n
    tie = itertools.count()
    heap = [(-rank(start), next(tie), src)]
    while heap:
        _, _, x = heapq.heappop(heap)
        if done[x]:
            continue
        done[x] = True
        if not relays[x]:
            continue
        for y in system.neighbors[x]:
            if done[y]:
                continue
            cand = metric.met(best[x], system.weight(x, y))
            if best[y] is None or rank(cand) > rank(best[y]):
                best[y] = cand
                heapq.heappush(heap, (-rank(cand), next(tie), y))
    return best


def mu_brute_force_from(
    system: WeightedSystem, src: int, start: Any = None, budget: int = DEFAULT_PATH_BUDGET
) -> list:
    """Best prefix-met value at every process over all simple paths leaving ``src``."""
    start = system.metric.mr if start is None else start
    return _with_fallback(lambda restricted: _enumerate_pass(system, src, start, budget, restricted))


def _enumerate_pass(system: WeightedSystem, src: int, start: Any, budget: int, restricted: bool) -> list:
    metric = system.metric
    rank = metric.rank
    best: list = [None] * system.n
    best[src] = start
    on_path = [False] * system.n
    on_path[src] = True
    relays = _relays(system, src, restricted)
    used = 0

    def extend(x: int, level: Any) -> None:
        nonlocal used
        for y in system.neighbors[x]:
            if on_path[y]:
                continue
            used += 1
            if used > budget:
                raise OracleBudgetExceeded(f"more than {budget} path extensions")
            val = metric.met(level, system.weight(x, y))
            if best[y] is None or rank(val) > rank(best[y]):
                best[y] = val
            if relays[y]:
                on_path[y] = True
                extend(y, val)
                on_path[y] = False

    extend(src, start)
    return best


def mu_brute_force(
    system: WeightedSystem, u: int, v: int, budget: int = DEFAULT_PATH_BUDGET
) -> Any:
    """The metric-maximum over an explicit enumeration of simple ``u``-``v`` paths."""
    if u == v:
        return system.metric.mr
    return mu_brute_force_from(system, v, None, budget)[u]


def mu_from(system: WeightedSystem, src: int, start: Any = None) -> list:
    """mu(., src) for every process, with ``src`` at level ``start`` (default mr).

    Results are cached on the system object.
    """
    metric = system.metric
    start = metric.mr if start is None else start
    cache = system.__dict__.setdefault("_mu_cache", {})
    key = (src, start)
    if key not in cache:
        if check_properties(metric).maximizable:
            cache[key] = _dijkstra(system, src, start)
        else:
            cache[key] = mu_brute_force_from(system, src, start)
    return cache[key]


def mu(system: WeightedSystem, u: int, v: int) -> Any:
    return mu_from(system, v)[u]


@dataclass(frozen=True)
class MuTable:
    """mu(u, rho) for every process u and every designated root rho in {r} + B."""

    system: WeightedSystem
    roots: tuple[int, ...]
    entries: dict

    def __getitem__(self, key: tuple[int, int]) -> Any:
        return self.entries[key]

    def to_dict(self, encode: Callable[[Any], Any] = lambda x: x) -> dict:
        s = self.system
        return {
            "designated_roots": [s.names[x] for x in self.roots],
            "rows": [
                {
                    "process": s.names[u],
                    "mu": {s.names[x]: encode(self.entries[(u, x)]) for x in self.roots},
                }
                for u in s.processes
            ],
        }


def mu_table(system: WeightedSystem) -> MuTable:
    roots = (system.root, *sorted(system.byzantine))
    entries = {}
    for x in roots:
        col = mu_from(system, x)
        for u in system.processes:
            entries[(u, x)] = col[u]
    return MuTable(system, roots, entries)


def reference_forest(system: WeightedSystem) -> dict[int, tuple[int, Any]]:
    """For each correct process, the designated root offering the best mu and that value.

    Ties go to the real root, then to the lowest Byzantine id.
    """
    key = unreachable_last(system.metric)
    roots = (system.root, *sorted(system.byzantine))
    cols = {x: mu_from(system, x) for x in roots}
    out = {}
    for u in system.correct:
        best_root = roots[0]
        for x in roots[1:]:
            if key(cols[best_root][u]) < key(cols[x][u]):
                best_root = x
        out[u] = (best_root, cols[best_root][u])
    return out
