"""Weighted systems, process states and configurations.

Processes carry 0-based integer ids; builders put the root at id 0.  Each
process addresses its neighbours by local label, the index into its
neighbour list sorted by global id.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from .metrics import RoutingMetric

__all__ = [
    "SystemError_",
    "WeightedSystem",
    "ProcessState",
    "Configuration",
    "build_system",
    "distance",
    "random_system",
    "random_configuration",
]


class SystemError_(ValueError):
    """Invalid system description (disconnected, faulty root, bad weight...)."""


@dataclass(frozen=True, slots=True)
class ProcessState:
    """O-variables ``prnt`` (local label or None for bottom) and ``level``.

    ``hops`` is the protocol's auxiliary hop counter; it is not an O-variable.
    """

    prnt: int | None
    level: Any
    hops: int = 0

    def same_output(self, other: "ProcessState") -> bool:
        return self.prnt == other.prnt and self.level == other.level


@dataclass(frozen=True, eq=False)
class WeightedSystem:
    names: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    weights: Mapping[tuple[int, int], Any]
    root: int
    byzantine: frozenset[int]
    metric: RoutingMetric

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def processes(self) -> range:
        return range(len(self.names))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in self.names]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _labels(self) -> tuple[dict[int, int], ...]:
        return tuple({u: i for i, u in enumerate(nb)} for nb in self.neighbors)

    @cached_property
    def correct(self) -> tuple[int, ...]:
        return tuple(v for v in self.processes if v not in self.byzantine)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def weight(self, u: int, v: int) -> Any:
        return self.weights[(u, v) if u < v else (v, u)]

    def label(self, v: int, u: int) -> int:
        """Local label under which ``v`` sees its neighbour ``u``."""
        return self._labels[v][u]

    def neighbor(self, v: int, label: int | None) -> int | None:
        return None if label is None else self.neighbors[v][label]

    def pid(self, name: str | int) -> int:
        if isinstance(name, int) and 0 <= name < self.n:
            return name
        try:
            return self._index[name]
        except KeyError:
            raise SystemError_(f"unknown process {name!r}") from None

    def is_byzantine(self, v: int) -> bool:
        return v in self.byzantine

    def __repr__(self) -> str:
        return f"WeightedSystem(n={self.n}, m={self.m}, metric={self.metric.name})"


@dataclass(frozen=True)
class Configuration:
    """An immutable snapshot of every process state, indexed by process id."""

    states: tuple[ProcessState, ...]

    def __getitem__(self, v: int) -> ProcessState:
        return self.states[v]

    def __len__(self) -> int:
        return len(self.states)

    def replace(self, updates: Mapping[int, ProcessState]) -> "Configuration":
        if not updates:
            return self
        states = list(self.states)
        for v, s in updates.items():
            states[v] = s
        return Configuration(tuple(states))

    def parent(self, system: WeightedSystem, v: int) -> int | None:
        return system.neighbor(v, self.states[v].prnt)

    def diff(self, other: "Configuration") -> list[int]:
        return [v for v, (a, b) in enumerate(zip(self.states, other.states)) if a != b]

    def output_diff(self, other: "Configuration") -> list[int]:
        return [
            v
            for v, (a, b) in enumerate(zip(self.states, other.states))
            if not a.same_output(b)
        ]


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for x in adj[u]:
            if x not in seen:
                seen.add(x)
                queue.append(x)
    return len(seen) == n


def build_system(
    nodes: Sequence[str] | int,
    edges: Iterable[tuple[Any, Any, Any]],
    metric: RoutingMetric,
    root: Any = 0,
    byzantine: Iterable[Any] = (),
) -> WeightedSystem:
    """Validate a graph description and return a :class:`WeightedSystem`.

    ``nodes`` is a list of names or a process count; edge endpoints, the
    root and Byzantine processes may be given by name or by id.
    """
    names = tuple(str(i) for i in range(nodes)) if isinstance(nodes, int) else tuple(nodes)
    if not names:
        raise SystemError_("a system needs at least one process")
    if len(set(names)) != len(names):
        raise SystemError_("duplicate process names")
    index = {name: i for i, name in enumerate(names)}

    def pid(x: Any) -> int:
        if isinstance(x, str) and x in index:
            return index[x]
        if isinstance(x, int) and not isinstance(x, bool) and 0 <= x < len(names):
            return x
        raise SystemError_(f"unknown process {x!r}")

    weights: dict[tuple[int, int], Any] = {}
    for a, b, w in edges:
        u, v = pid(a), pid(b)
        if u == v:
            raise SystemError_(f"self-loop at {names[u]!r}")
        key = (u, v) if u < v else (v, u)
        if key in weights:
            raise SystemError_(f"duplicate edge {names[u]!r}-{names[v]!r}")
        if not metric.is_weight(w):
            raise SystemError_(f"weight {w!r} on {names[u]!r}-{names[v]!r} is not in W of {metric.name}")
        weights[key] = w

    r = pid(root)
    byz = frozenset(pid(b) for b in byzantine)
    if r in byz:
        raise SystemError_("the root must not be Byzantine")
    if not _connected(len(names), weights):
        raise SystemError_("graph is not connected")
    return WeightedSystem(
        names=names,
        edges=tuple(sorted(weights)),
        weights=weights,
        root=r,
        byzantine=byz,
        metric=metric,
    )


def distances_from(system: WeightedSystem, u: int) -> list[int]:
    cache = system.__dict__.setdefault("_bfs_cache", {})
    if u not in cache:
        dist = [-1] * system.n
        dist[u] = 0
        queue = deque([u])
        while queue:
            x = queue.popleft()
            for y in system.neighbors[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        cache[u] = dist
    return cache[u]


def distance(system: WeightedSystem, u: int, v: int) -> int:
    """Hop distance between ``u`` and ``v``."""
    return distances_from(system, u)[v]


def random_system(
    metric: RoutingMetric,
    n: int,
    rng: random.Random,
    byzantine: int = 0,
    density: float | None = None,
    weights: Sequence[Any] | None = None,
) -> WeightedSystem:
    """A random connected system: a random spanning tree plus extra edges.

    Process 0 is the root and ``byzantine`` processes are drawn from the
    rest.  Weights are drawn uniformly from ``weights`` (default: the
    metric's weight sample).
    """
    if byzantine >= n:
        raise SystemError_("need at least one correct process besides the Byzantine ones")
    pool = list(weights if weights is not None else metric.weights)
    p = rng.uniform(0.1, 0.9) if density is None else density
    pairs = set()
    for v in range(1, n):
        pairs.add((rng.randrange(v), v))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in pairs and rng.random() < p:
                pairs.add((u, v))
    edges = [(u, v, rng.choice(pool)) for u, v in sorted(pairs)]
    byz = rng.sample(range(1, n), byzantine) if byzantine else []
    names = ["r"] + [f"p{i}" for i in range(1, n)]
    return build_system(names, edges, metric, root=0, byzantine=byz)


def random_configuration(system: WeightedSystem, rng_seed: int | random.Random) -> Configuration:
    """Uniformly random prnt in N_v + {bottom}, level in the sampled M, hops in 0..n."""
    rng = rng_seed if isinstance(rng_seed, random.Random) else random.Random(rng_seed)
    values = system.metric.values
    states = []
    for v in system.processes:
        deg = len(system.neighbors[v])
        choice = rng.randrange(deg + 1)
        prnt = None if choice == deg else choice
        states.append(ProcessState(prnt, rng.choice(values), rng.randint(0, system.n)))
    return Configuration(tuple(states))
