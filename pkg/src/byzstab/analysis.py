"""Legitimacy, containment areas, stability and disruption counting.

An *area* names the processes whose behaviour is excused: for the
set-valued kinds (S_B, S_B*, custom) the area-correct processes are the
correct ones outside the set; for ``radius(c)`` they are the correct
processes more than ``c`` hops from every Byzantine process.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .engine import ExecutionTrace
from .oracle import mu_from, unreachable_last
from .protocol import TreeProtocol
from .system import Configuration, WeightedSystem, distances_from

__all__ = [
    "ContainmentArea",
    "compute_area",
    "area_correct",
    "check_spec",
    "is_legitimate",
    "is_stable",
    "LegitimacyTracker",
    "DisruptionReport",
    "count_disruptions",
    "verify_disruption_windows",
    "ContainmentVerdict",
    "check_ta_strict_containment",
]

AREA_KINDS = ("S_B", "S_B_star", "radius", "custom")


@dataclass(frozen=True)
class ContainmentArea:
    kind: str
    members: frozenset[int]
    radius: int | None = None

    def label(self) -> str:
        return f"radius({self.radius})" if self.kind == "radius" else self.kind

    def to_dict(self, system: WeightedSystem) -> dict:
        return {
            "kind": self.label(),
            "members": sorted(system.names[v] for v in self.members),
        }


def compute_area(
    system: WeightedSystem,
    kind: str,
    c: int | None = None,
    members: Iterable[Any] = (),
) -> ContainmentArea:
    """Evaluate an area's defining formula with designated roots pinned at mr.

    ``kind`` is ``"S_B"``, ``"S_B_star"``, ``"radius"`` (needs ``c``) or
    ``"custom"`` (takes ``members`` by name or id).
    """
    metric = system.metric
    if kind == "radius":
        if c is None or c < 0:
            raise ValueError("radius areas need c >= 0")
        dists = [distances_from(system, b) for b in system.byzantine]
        inside = {v for v in system.correct if any(d[v] <= c for d in dists)}
        return ContainmentArea("radius", frozenset(inside), c)
    if kind == "custom":
        ids = frozenset(system.pid(x) for x in members)
        if ids & system.byzantine:
            raise ValueError("an area cannot contain Byzantine processes")
        return ContainmentArea("custom", ids)
    if kind not in ("S_B", "S_B_star"):
        raise ValueError(f"unknown area kind {kind!r}; expected one of {', '.join(AREA_KINDS)}")
    if not system.byzantine:
        return ContainmentArea(kind, frozenset())
    key = unreachable_last(metric)
    to_r = mu_from(system, system.root)
    to_b = [mu_from(system, b) for b in sorted(system.byzantine)]
    out = set()
    for v in system.correct:
        threat = max(key(col[v]) for col in to_b)
        if kind == "S_B":
            if v != system.root and key(to_r[v]) <= threat:
                out.add(v)
        elif key(to_r[v]) < threat:
            out.add(v)
    return ContainmentArea(kind, frozenset(out))


def area_correct(system: WeightedSystem, area: ContainmentArea) -> tuple[int, ...]:
    return tuple(v for v in system.correct if v not in area.members)


def _spec_with_deps(
    system: WeightedSystem, config: Configuration, v: int, mu_mode: str
) -> tuple[bool, set[int]]:
    """check_spec plus the set of processes whose state the verdict read."""
    metric = system.metric
    rank = metric.rank
    deps = {v}
    s = config[v]
    if v == system.root:
        return s.prnt is None and s.level == metric.mr, deps

    chain = [v]
    seen = {v}
    cur = v
    while True:
        if cur in system.byzantine:
            if mu_mode == "pinned" and (config[cur].prnt is not None or config[cur].level != metric.mr):
                return False, deps
            break
        if cur == system.root:
            if config[cur].prnt is not None or config[cur].level != metric.mr:
                return False, deps
            break
        parent = config.parent(system, cur)
        if parent is None:
            return False, deps
        if parent in seen:
            deps.add(parent)
            return False, deps
        seen.add(parent)
        deps.add(parent)
        chain.append(parent)
        cur = parent
    terminus = chain[-1]

    # chain runs from v up to the terminus; each edge (child, parent)
    for child, parent in zip(chain, chain[1:]):
        w = system.weight(child, parent)
        offered = metric.met(config[parent].level, w)
        if offered != config[child].level:
            return False, deps
        deps.update(system.neighbors[child])
        top = max(rank(metric.met(config[u].level, system.weight(child, u))) for u in system.neighbors[child])
        if rank(offered) != top:
            return False, deps

    start = metric.mr if mu_mode == "pinned" else config[terminus].level
    return s.level == mu_from(system, terminus, start)[v], deps


def check_spec(system: WeightedSystem, config: Configuration, v: int, mu_mode: str = "pinned") -> bool:
    """Whether ``v`` sits on an M-path ending at r or at a Byzantine process.

    ``mu_mode="pinned"`` requires a Byzantine terminus to hold (bottom, mr)
    and compares against mu with the terminus at mr; ``"actual"`` accepts a
    Byzantine terminus in any state and starts mu from its current level.
    """
    if mu_mode not in ("pinned", "actual"):
        raise ValueError(f"mu_mode must be 'pinned' or 'actual', got {mu_mode!r}")
    return _spec_with_deps(system, config, v, mu_mode)[0]


def is_legitimate(
    system: WeightedSystem, config: Configuration, area: ContainmentArea, mu_mode: str = "pinned"
) -> bool:
    return all(check_spec(system, config, v, mu_mode) for v in area_correct(system, area))


def is_stable(
    system: WeightedSystem,
    config: Configuration,
    area: ContainmentArea,
    protocol: TreeProtocol = TreeProtocol(),
) -> bool:
    """No area-correct process is enabled to change ``prnt`` or ``level``."""
    return not any(protocol.enabled_output(system, config, v) for v in area_correct(system, area))


class LegitimacyTracker:
    """Incremental legitimacy/stability along a trace.

    After each step only the processes whose recorded dependencies were
    touched are re-examined.
    """

    def __init__(
        self,
        system: WeightedSystem,
        area: ContainmentArea,
        config: Configuration,
        protocol: TreeProtocol = TreeProtocol(),
        mu_mode: str = "pinned",
    ) -> None:
        self.system = system
        self.protocol = protocol
        self.mu_mode = mu_mode
        self.watched = area_correct(system, area)
        self._watched_set = set(self.watched)
        self.config = config
        self.spec_ok: dict[int, bool] = {}
        self.deps: dict[int, set[int]] = {}
        self.unstable: set[int] = set()
        for v in self.watched:
            self._refresh_spec(v)
            self._refresh_stable(v)

    def _refresh_spec(self, v: int) -> None:
        ok, deps = _spec_with_deps(self.system, self.config, v, self.mu_mode)
        self.spec_ok[v] = ok
        self.deps[v] = deps

    def _refresh_stable(self, v: int) -> None:
        if self.protocol.enabled_output(self.system, self.config, v):
            self.unstable.add(v)
        else:
            self.unstable.discard(v)

    def advance(self, config: Configuration, changed: Iterable[int]) -> None:
        self.config = config
        changed = set(changed)
        if not changed:
            return
        near = set(changed)
        for x in changed:
            near.update(self.system.neighbors[x])
        for v in self.watched:
            if self.deps[v] & changed:
                self._refresh_spec(v)
        for v in near & self._watched_set:
            self._refresh_stable(v)

    @property
    def legitimate(self) -> bool:
        return all(self.spec_ok.values())

    @property
    def stable(self) -> bool:
        return not self.unstable


def _scan(
    trace: ExecutionTrace, area: ContainmentArea, protocol: TreeProtocol, mu_mode: str
) -> tuple[list[bool], list[bool], list[tuple[int, ...]]]:
    """Per index: legitimate, stable; per step: area-correct processes whose O-variables changed."""
    system = trace.system
    tracker = LegitimacyTracker(system, area, trace.initial, protocol, mu_mode)
    watched = set(tracker.watched)
    legit = [tracker.legitimate]
    stable = [tracker.stable]
    o_changes: list[tuple[int, ...]] = [()]
    prev = trace.initial
    for s in trace.steps:
        tracker.advance(s.config, s.changed)
        legit.append(tracker.legitimate)
        stable.append(tracker.stable)
        o_changes.append(tuple(v for v in s.changed if v in watched and not prev[v].same_output(s.config[v])))
        prev = s.config
    return legit, stable, o_changes


@dataclass
class DisruptionReport:
    area: ContainmentArea
    windows: list[tuple[int, int]]
    per_process_changes: dict[int, int]
    legit_stable_indices: list[int]
    unclosed: tuple[int, int] | None = None
    trace_length: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.windows)

    def to_dict(self, system: WeightedSystem) -> dict:
        return {
            "area": self.area.to_dict(system),
            "t": self.total,
            "windows": [list(w) for w in self.windows],
            "unclosed_window": None if self.unclosed is None else list(self.unclosed),
            "per_process_changes": {system.names[v]: k for v, k in sorted(self.per_process_changes.items())},
            "first_legit_stable": self.legit_stable_indices[0] if self.legit_stable_indices else None,
            "legit_stable_count": len(self.legit_stable_indices),
            "trace_length": self.trace_length,
        }


def count_disruptions(
    trace: ExecutionTrace,
    area: ContainmentArea,
    protocol: TreeProtocol = TreeProtocol(),
    mu_mode: str = "pinned",
) -> DisruptionReport:
    """Windows between consecutive legitimate-and-stable configurations that
    contain an O-variable change by an area-correct process.

    A trace that ends inside such a window reports it as ``unclosed`` without
    counting it.  Per-process change counts start at the first
    legitimate-and-stable configuration.
    """
    system = trace.system
    legit, stable, o_changes = _scan(trace, area, protocol, mu_mode)
    good = [i for i, (a, b) in enumerate(zip(legit, stable)) if a and b]
    windows = []
    for s, e in zip(good, good[1:]):
        if any(o_changes[i] for i in range(s + 1, e + 1)):
            windows.append((s, e))
    unclosed = None
    if good:
        last = good[-1]
        for i in range(last + 1, len(o_changes)):
            if o_changes[i]:
                unclosed = (last, len(o_changes) - 1)
                break
    counts = dict.fromkeys(area_correct(system, area), 0)
    if good:
        for i in range(good[0] + 1, len(o_changes)):
            for v in o_changes[i]:
                counts[v] += 1
    return DisruptionReport(area, windows, counts, good, unclosed, len(trace.steps))


def verify_disruption_windows(
    trace: ExecutionTrace,
    report: DisruptionReport,
    protocol: TreeProtocol = TreeProtocol(),
    mu_mode: str = "pinned",
) -> list[str]:
    """Re-check every reported window from scratch; returns the violated clauses."""
    system = trace.system
    area = report.area
    configs = trace.configs
    watched = set(area_correct(system, area))

    def good(i: int) -> bool:
        c = configs[i]
        return is_legitimate(system, c, area, mu_mode) and is_stable(system, c, area, protocol)

    def o_change(i: int) -> bool:
        before, after = configs[i - 1], configs[i]
        return any(not before[v].same_output(after[v]) for v in watched)

    problems = []
    last_end = -1
    for s, e in report.windows:
        if not s < e:
            problems.append(f"window {(s, e)} is empty")
            continue
        if s < last_end:
            problems.append(f"window {(s, e)} overlaps the previous one")
        last_end = e
        if not good(s):
            problems.append(f"window {(s, e)}: start is not legitimate and stable")
        if not good(e):
            problems.append(f"window {(s, e)}: end is not legitimate and stable")
        if any(good(i) for i in range(s + 1, e)):
            problems.append(f"window {(s, e)}: end is not the first legitimate and stable successor")
        if not any(o_change(i) for i in range(s + 1, e + 1)):
            problems.append(f"window {(s, e)}: no area-correct O-variable change")
    return problems


@dataclass(frozen=True)
class ContainmentVerdict:
    """Suffix reading: from ``index`` on, every configuration is legitimate for the
    area and no area-correct process changes an O-variable."""

    reached: bool
    index: int | None
    from_start: bool
    trace_length: int

    @property
    def suffix_length(self) -> int:
        return 0 if self.index is None else self.trace_length - self.index

    def to_dict(self) -> dict:
        return {
            "reached": self.reached,
            "index": self.index,
            "suffix_length": self.suffix_length,
            "from_start": self.from_start,
            "trace_length": self.trace_length,
        }


def check_ta_strict_containment(
    trace: ExecutionTrace,
    area: ContainmentArea,
    protocol: TreeProtocol = TreeProtocol(),
    mu_mode: str = "pinned",
) -> ContainmentVerdict:
    legit, _, o_changes = _scan(trace, area, protocol, mu_mode)
    last = len(legit) - 1
    if not legit[last]:
        return ContainmentVerdict(False, None, False, last)
    i = last
    while i > 0 and legit[i - 1] and not o_changes[i]:
        i -= 1
    return ContainmentVerdict(True, i, i == 0, last)


def legit_stable_flags(
    trace: ExecutionTrace,
    area: ContainmentArea,
    protocol: TreeProtocol = TreeProtocol(),
    mu_mode: str = "pinned",
) -> Sequence[bool]:
    legit, stable, _ = _scan(trace, area, protocol, mu_mode)
    return [a and b for a, b in zip(legit, stable)]
