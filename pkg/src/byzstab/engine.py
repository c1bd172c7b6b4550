"""Executions: daemons pick activation sets, adversaries write Byzantine state.

One step reads the pre-step configuration for every activated correct
process, applies their new states simultaneously, and only then applies
the adversary's writes, which are computed from that intermediate
configuration.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Iterable, Iterator, Mapping, Sequence

from .protocol import TreeProtocol
from .system import Configuration, ProcessState, WeightedSystem

log = logging.getLogger(__name__)

__all__ = [
    "EngineError",
    "Daemon",
    "CentralDaemon",
    "DistributedDaemon",
    "SynchronousDaemon",
    "ScriptedSchedule",
    "make_daemon",
    "Adversary",
    "NoAdversary",
    "MirrorRoot",
    "BehaveCorrectly",
    "ResetRootState",
    "RandomWrites",
    "ScriptedWrites",
    "make_adversary",
    "Step",
    "ExecutionTrace",
    "step",
    "run",
    "concat_traces",
    "fairness_violations",
    "write_trace",
    "read_trace",
]

SCHEMA_VERSION = 1


class EngineError(ValueError):
    """Illegal activation or write (Byzantine activated, correct process written...)."""


def derive_rng(seed: Any, stream: str) -> random.Random:
    return random.Random(f"{seed}:{stream}")


# ---------------------------------------------------------------------------
# daemons


class Daemon:
    kind = "daemon"
    fair = True

    def reset(self, system: WeightedSystem) -> None:
        self._waits: dict[int, int] = {}
        self._limit = 2 * system.n

    def choose(self, enabled: Sequence[int], rng: random.Random) -> tuple[int, ...]:
        raise NotImplementedError

    def exhausted(self) -> bool:
        return False

    def _overdue(self, enabled: Sequence[int]) -> list[int]:
        waits = {v: self._waits.get(v, 0) for v in enabled}
        self._waits = waits
        if not self.fair:
            return []
        late = [v for v in enabled if waits[v] >= self._limit]
        return sorted(late, key=lambda v: (-waits[v], v))

    def _account(self, enabled: Sequence[int], chosen: Iterable[int]) -> None:
        picked = set(chosen)
        for v in enabled:
            self._waits[v] = 0 if v in picked else self._waits[v] + 1

    def describe(self) -> str:
        return self.kind


class CentralDaemon(Daemon):
    """One process per step.

    Fair mode picks uniformly among enabled processes but forces the
    longest-waiting one once it has waited ``2n`` steps, which keeps every
    wait below ``4n``.  Unfair mode always picks the lowest id.
    """

    kind = "central"

    def __init__(self, fair: bool = True) -> None:
        self.fair = fair

    def choose(self, enabled: Sequence[int], rng: random.Random) -> tuple[int, ...]:
        if not enabled:
            return ()
        late = self._overdue(enabled)
        if late:
            pick = late[0]
        elif self.fair:
            pick = rng.choice(enabled)
        else:
            pick = min(enabled)
        self._account(enabled, (pick,))
        return (pick,)

    def describe(self) -> str:
        return "central-fair" if self.fair else "central-adversarial"


class DistributedDaemon(Daemon):
    """A random non-empty subset of the enabled processes, plus any overdue ones."""

    kind = "distributed"

    def __init__(self, fair: bool = True, p: float = 0.5) -> None:
        self.fair = fair
        self.p = p

    def choose(self, enabled: Sequence[int], rng: random.Random) -> tuple[int, ...]:
        if not enabled:
            return ()
        picked = {v for v in enabled if rng.random() < self.p}
        picked.update(self._overdue(enabled))
        if not picked:
            picked.add(rng.choice(enabled))
        self._account(enabled, picked)
        return tuple(sorted(picked))

    def describe(self) -> str:
        return "distributed-fair" if self.fair else "distributed-adversarial"


class SynchronousDaemon(Daemon):
    kind = "synchronous"

    def choose(self, enabled: Sequence[int], rng: random.Random) -> tuple[int, ...]:
        return tuple(enabled)


class ScriptedSchedule(Daemon):
    """Replays a fixed list of activation sets, then stops the run."""

    kind = "scripted"
    fair = False

    def __init__(self, sets: Iterable[Iterable[int]]) -> None:
        self.sets = [tuple(sorted(s)) for s in sets]
        self._pos = 0

    def reset(self, system: WeightedSystem) -> None:
        super().reset(system)
        self._pos = 0

    def choose(self, enabled: Sequence[int], rng: random.Random) -> tuple[int, ...]:
        chosen = self.sets[self._pos]
        self._pos += 1
        return chosen

    def exhausted(self) -> bool:
        return self._pos >= len(self.sets)


DAEMON_KINDS = ("central-fair", "central-adversarial", "distributed-fair", "distributed-adversarial", "synchronous")


def make_daemon(name: str) -> Daemon:
    if name == "central-fair":
        return CentralDaemon(True)
    if name == "central-adversarial":
        return CentralDaemon(False)
    if name == "distributed-fair":
        return DistributedDaemon(True)
    if name == "distributed-adversarial":
        return DistributedDaemon(False)
    if name == "synchronous":
        return SynchronousDaemon()
    raise EngineError(f"unknown daemon {name!r}; expected one of {', '.join(DAEMON_KINDS)}")


# ---------------------------------------------------------------------------
# adversaries


class Adversary:
    """Chooses writes to Byzantine processes after each step's protocol actions."""

    name = "none"

    def reset(self, system: WeightedSystem) -> None:
        pass

    def writes(
        self,
        system: WeightedSystem,
        protocol: TreeProtocol,
        before: Configuration,
        mid: Configuration,
        activated: tuple[int, ...],
        rng: random.Random,
    ) -> dict[int, ProcessState]:
        return {}

    def idle(self, system: WeightedSystem, protocol: TreeProtocol, config: Configuration) -> bool:
        """True when the strategy would write nothing from ``config`` on its own."""
        return True


class NoAdversary(Adversary):
    name = "none"


def _root_state(system: WeightedSystem) -> ProcessState:
    return ProcessState(None, system.metric.mr, 0)


@dataclass
class MirrorRoot(Adversary):
    """The Byzantine image of r copies r's state right after every step that activates r.

    ``symmetry`` is a graph automorphism (process -> process) mapping r to
    the Byzantine process; r's parent pointer is translated through it.
    """

    symmetry: Mapping[int, int]
    name: str = field(default="mirror-root", init=False)

    def _image(self, system: WeightedSystem, config: Configuration) -> tuple[int, ProcessState]:
        r = system.root
        b = self.symmetry[r]
        s = config[r]
        parent = config.parent(system, r)
        prnt = None if parent is None else system.label(b, self.symmetry[parent])
        return b, ProcessState(prnt, s.level, s.hops)

    def reset(self, system: WeightedSystem) -> None:
        if not self.symmetry:
            raise EngineError("mirror-root needs a symmetry map")
        if self.symmetry.get(system.root) not in system.byzantine:
            raise EngineError("the symmetry map must send r to a Byzantine process")

    def writes(self, system, protocol, before, mid, activated, rng):
        if system.root not in activated:
            return {}
        b, state = self._image(system, mid)
        return {} if mid[b] == state else {b: state}

    def idle(self, system, protocol, config):
        return not protocol.enabled(system, config, system.root)


class BehaveCorrectly(Adversary):
    """Every Byzantine process runs the protocol, as if it were correct."""

    name = "behave-correctly"

    def writes(self, system, protocol, before, mid, activated, rng):
        out = {}
        for b in sorted(system.byzantine):
            new = protocol.rule(system, mid, b)
            if new != mid[b]:
                out[b] = new
        return out

    def idle(self, system, protocol, config):
        return not any(protocol.enabled(system, config, b) for b in system.byzantine)


class ResetRootState(Adversary):
    """Byzantine processes claim to be roots: prnt bottom, level mr."""

    name = "reset-root-state"

    def writes(self, system, protocol, before, mid, activated, rng):
        target = _root_state(system)
        return {b: target for b in sorted(system.byzantine) if mid[b] != target}

    def idle(self, system, protocol, config):
        target = _root_state(system)
        return all(config[b] == target for b in system.byzantine)


@dataclass
class RandomWrites(Adversary):
    """Each step, each Byzantine process is overwritten with probability ``p``."""

    p: float = 0.5
    name: str = field(default="random-writes", init=False)

    def writes(self, system, protocol, before, mid, activated, rng):
        out = {}
        values = system.metric.values
        for b in sorted(system.byzantine):
            if rng.random() < self.p:
                deg = len(system.neighbors[b])
                choice = rng.randrange(deg + 1)
                prnt = None if choice == deg else choice
                out[b] = ProcessState(prnt, rng.choice(values), rng.randint(0, system.n))
        return out

    def idle(self, system, protocol, config):
        return not system.byzantine


@dataclass
class ScriptedWrites(Adversary):
    """Step i applies ``script[i]``; the strategy is idle once the script runs out."""

    script: Sequence[Mapping[int, ProcessState]]
    name: str = field(default="scripted", init=False)

    def reset(self, system: WeightedSystem) -> None:
        self._pos = 0

    def writes(self, system, protocol, before, mid, activated, rng):
        if self._pos >= len(self.script):
            return {}
        out = dict(self.script[self._pos])
        self._pos += 1
        return out

    def idle(self, system, protocol, config):
        return self._pos >= len(self.script)


ADVERSARY_KINDS = ("none", "mirror-root", "behave-correctly", "reset-root-state", "random-writes")


def make_adversary(name: str, symmetry: Mapping[int, int] | None = None, p: float = 0.5) -> Adversary:
    if name == "none":
        return NoAdversary()
    if name in ("random", "random-writes"):
        return RandomWrites(p)
    if name == "behave-correctly":
        return BehaveCorrectly()
    if name == "reset-root-state":
        return ResetRootState()
    if name == "mirror-root":
        if symmetry is None:
            raise EngineError("mirror-root needs a symmetry map")
        return MirrorRoot(symmetry)
    raise EngineError(f"unknown adversary {name!r}; expected one of {', '.join(ADVERSARY_KINDS)}")


# ---------------------------------------------------------------------------
# steps and traces


@dataclass(frozen=True)
class Step:
    activated: tuple[int, ...]
    byz_writes: Mapping[int, ProcessState]
    config: Configuration
    changed: tuple[int, ...]


@dataclass
class ExecutionTrace:
    system: WeightedSystem
    initial: Configuration
    steps: list[Step] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def configs(self) -> list[Configuration]:
        return [self.initial, *(s.config for s in self.steps)]

    @property
    def final(self) -> Configuration:
        return self.steps[-1].config if self.steps else self.initial

    def config_at(self, i: int) -> Configuration:
        return self.initial if i == 0 else self.steps[i - 1].config


def step(
    system: WeightedSystem,
    config: Configuration,
    activated: Iterable[int],
    writes: Mapping[int, ProcessState] | None = None,
    protocol: TreeProtocol = TreeProtocol(),
) -> Configuration:
    """Apply one step: every activated process reads ``config``; writes come last."""
    act = tuple(activated)
    for v in act:
        if v in system.byzantine:
            raise EngineError(f"Byzantine process {system.names[v]!r} cannot be activated")
    for b in writes or {}:
        if b not in system.byzantine:
            raise EngineError(f"adversary write to correct process {system.names[b]!r}")
    mid = config.replace({v: protocol.rule(system, config, v) for v in act})
    return mid.replace(writes or {})


def run(
    system: WeightedSystem,
    initial: Configuration,
    daemon: Daemon,
    adversary: Adversary | None = None,
    *,
    protocol: TreeProtocol = TreeProtocol(),
    max_steps: int = 10_000,
    stop: str | Callable[[Configuration], bool] = "quiescent",
    seed: Any = 0,
) -> ExecutionTrace:
    """Run until ``stop`` holds or ``max_steps`` steps have been taken.

    ``stop`` is ``"quiescent"`` (no correct process enabled and the adversary
    idle), ``"max-steps"``, or a predicate over configurations.
    """
    adversary = adversary or NoAdversary()
    daemon.reset(system)
    adversary.reset(system)
    d_rng = derive_rng(seed, "daemon")
    a_rng = derive_rng(seed, "adversary")
    correct = system.correct

    config = initial
    enabled = {v for v in correct if protocol.enabled(system, config, v)}
    trace = ExecutionTrace(system, initial)
    pending = set(enabled)
    rounds = 0
    reason = "max-steps"

    for _ in range(max_steps):
        if callable(stop) and stop(config):
            reason = "predicate"
            break
        if stop == "quiescent" and not enabled and adversary.idle(system, protocol, config):
            reason = "quiescent"
            break
        if daemon.exhausted():
            reason = "schedule-exhausted"
            break
        act = daemon.choose(sorted(enabled), d_rng)
        for v in act:
            if v in system.byzantine:
                raise EngineError(f"Byzantine process {system.names[v]!r} cannot be activated")
        mid = config.replace({v: protocol.rule(system, config, v) for v in act})
        writes = adversary.writes(system, protocol, config, mid, act, a_rng)
        for b in writes:
            if b not in system.byzantine:
                raise EngineError(f"adversary write to correct process {system.names[b]!r}")
        after = mid.replace(writes)
        changed = tuple(after.diff(config))
        trace.steps.append(Step(act, dict(writes), after, changed))

        touched = set(changed)
        for v in changed:
            touched.update(system.neighbors[v])
        for v in touched:
            if v in system.byzantine:
                continue
            if protocol.enabled(system, after, v):
                enabled.add(v)
            else:
                enabled.discard(v)
        config = after

        if pending:
            pending.difference_update(act)
            pending.intersection_update(enabled)
            if not pending:
                rounds += 1
                pending = set(enabled)
        else:
            pending = set(enabled)
    else:
        if callable(stop) and stop(config):
            reason = "predicate"
        elif stop == "quiescent" and not enabled and adversary.idle(system, protocol, config):
            reason = "quiescent"

    if reason == "max-steps" and stop != "max-steps":
        log.info("run hit the %d-step cap before its stop condition", max_steps)
    trace.metadata = {
        "seed": seed,
        "daemon": daemon.describe(),
        "adversary": adversary.name,
        "protocol": {"hop_bounded": protocol.hop_bounded, "sticky": protocol.sticky},
        "max_steps": max_steps,
        "steps": len(trace.steps),
        "rounds": rounds,
        "stop_reason": reason,
    }
    return trace


def concat_traces(traces: Sequence[ExecutionTrace], metadata: dict | None = None) -> ExecutionTrace:
    """Join traces whose endpoints line up into one trace."""
    if not traces:
        raise ValueError("nothing to concatenate")
    first = traces[0]
    out = ExecutionTrace(first.system, first.initial, [], dict(metadata or {}))
    prev = first.initial
    for t in traces:
        if t.initial != prev:
            raise ValueError("trace segments do not line up")
        out.steps.extend(t.steps)
        prev = t.final
    out.metadata.setdefault("steps", len(out.steps))
    return out


def fairness_violations(
    trace: ExecutionTrace, window: int | None = None, protocol: TreeProtocol = TreeProtocol()
) -> list[tuple[int, int]]:
    """(process, step) pairs where a correct process stayed enabled and unactivated
    for more than ``window`` consecutive steps (default 4n)."""
    system = trace.system
    window = 4 * system.n if window is None else window
    waits = dict.fromkeys(system.correct, 0)
    bad = []
    for i, config in enumerate(trace.configs[:-1]):
        act = set(trace.steps[i].activated)
        for v in system.correct:
            if v not in act and protocol.enabled(system, config, v):
                waits[v] += 1
                if waits[v] > window:
                    bad.append((v, i))
            else:
                waits[v] = 0
    return bad


# ---------------------------------------------------------------------------
# JSONL


def _encode_state(system: WeightedSystem, v: int, s: ProcessState, enc: Callable) -> dict:
    parent = system.neighbor(v, s.prnt)
    return {
        "prnt": None if parent is None else system.names[parent],
        "level": enc(s.level),
        "hops": s.hops,
    }


def _decode_state(system: WeightedSystem, v: int, d: Mapping, dec: Callable) -> ProcessState:
    prnt = None if d["prnt"] is None else system.label(v, system.pid(d["prnt"]))
    return ProcessState(prnt, dec(d["level"]), int(d.get("hops", 0)))


def write_trace(trace: ExecutionTrace, out: IO[str], snapshot_every: int = 100) -> None:
    """Header record, one record per step, and a full snapshot every ``snapshot_every`` steps."""
    from .io import encode_value, system_to_dict

    system = trace.system
    names = system.names

    def states(config: Configuration) -> dict:
        return {names[v]: _encode_state(system, v, config[v], encode_value) for v in system.processes}

    def emit(record: dict) -> None:
        out.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")

    emit(
        {
            "type": "header",
            "schema_version": SCHEMA_VERSION,
            "metadata": trace.metadata,
            "system": system_to_dict(system),
            "initial": states(trace.initial),
            "snapshot_every": snapshot_every,
        }
    )
    for i, s in enumerate(trace.steps, start=1):
        emit(
            {
                "type": "step",
                "i": i,
                "activated": [names[v] for v in s.activated],
                "byz_writes": {
                    names[b]: _encode_state(system, b, st, encode_value) for b, st in sorted(s.byz_writes.items())
                },
                "changed": {names[v]: _encode_state(system, v, s.config[v], encode_value) for v in s.changed},
            }
        )
        if snapshot_every and i % snapshot_every == 0:
            emit({"type": "snapshot", "i": i, "states": states(s.config)})


def read_trace(lines: Iterable[str]) -> Iterator[tuple[WeightedSystem, int, Configuration]]:
    """Replay a JSONL trace, yielding ``(system, index, configuration)`` for every index.

    Snapshots are cross-checked against the replayed state.
    """
    from .io import decode_value, system_from_dict

    system: WeightedSystem | None = None
    config: Configuration | None = None
    for line in lines:
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = rec["type"]
        if kind == "header":
            system = system_from_dict(rec["system"])
            dec = lambda x: decode_value(system.metric, x)  # noqa: E731
            config = Configuration(
                tuple(_decode_state(system, v, rec["initial"][system.names[v]], dec) for v in system.processes)
            )
            yield system, 0, config
        elif kind == "step":
            assert system is not None and config is not None
            dec = lambda x: decode_value(system.metric, x)  # noqa: E731
            updates = {
                system.pid(name): _decode_state(system, system.pid(name), d, dec) for name, d in rec["changed"].items()
            }
            config = config.replace(updates)
            yield system, rec["i"], config
        elif kind == "snapshot":
            assert system is not None and config is not None
            dec = lambda x: decode_value(system.metric, x)  # noqa: E731
            snap = Configuration(
                tuple(_decode_state(system, v, rec["states"][system.names[v]], dec) for v in system.processes)
            )
            if snap != config:
                raise ValueError(f"snapshot at step {rec['i']} disagrees with the replayed state")
