"""Adversarial constructions showing unbounded disruption, and small example systems.

Each scenario is a small symmetric system with one Byzantine process ``b``
and a cycle of three phases:

1. ``mirror-root``: b copies r, so the system settles into two trees, one
   rooted at r and one at b (waypoint rho_1);
2. ``behave-correctly``: b runs the protocol and joins r's tree, dragging
   correct processes with it (waypoint rho_2);
3. ``reset-root-state``: b claims to be a root again and the system returns
   to the rho_1 shape.

Every cycle makes a correct process outside the tolerated area change its
output variables, so K cycles give at least K disruptions.
"""

from __future__ import annotations

import functools
import logging
import os
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

from .analysis import ContainmentArea, DisruptionReport, check_spec, compute_area, count_disruptions
from .engine import (
    Adversary,
    BehaveCorrectly,
    CentralDaemon,
    ExecutionTrace,
    MirrorRoot,
    ResetRootState,
    concat_traces,
    run,
)
from .metrics import RoutingMetric, builtin_metric, check_properties, utility_chain
from .oracle import mu_from, reference_forest
from .protocol import TreeProtocol
from .system import Configuration, ProcessState, WeightedSystem, build_system, random_configuration

log = logging.getLogger(__name__)

__all__ = [
    "ScenarioInapplicable",
    "BudgetExceeded",
    "WaypointError",
    "Phase",
    "Scenario",
    "decreasing_chain",
    "build_decreasing_chain",
    "build_mixed_value_chain",
    "build_fixed_point_chain",
    "build_six_process_gadget",
    "build_scenario",
    "run_cycles",
    "example_system",
    "EXAMPLE_SYSTEMS",
]

SCENARIO_NAMES = ("theorem5-case1", "theorem5-case2", "theorem5-case3", "theorem6")


class ScenarioInapplicable(ValueError):
    """The metric does not admit the requested construction."""


class BudgetExceeded(RuntimeError):
    """A phase did not become quiescent within its step budget."""


class WaypointError(AssertionError):
    """A phase ended in a configuration other than the expected waypoint."""


@dataclass(frozen=True)
class Phase:
    name: str
    make_adversary: Callable[[], Adversary]
    waypoint: str
    check: Callable[[Configuration], list[str]]


@dataclass
class Scenario:
    name: str
    system: WeightedSystem
    initial: Configuration
    phases: list[Phase]
    area: ContainmentArea
    symmetry: dict[int, int]
    expected_per_cycle: int = 1
    params: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# value-chain search


def decreasing_chain(metric: RoutingMetric, steps: int) -> tuple[list, list] | None:
    """Values m_0=mr > m_1 > ... > m_steps with m_{i+1} = met(m_i, w_i), found by search.

    Weights are tried in the metric's listed order; returns ``(values,
    weights)`` or None if no such chain exists inside the sample.
    """
    rank = metric.rank
    sample = set(metric.values)

    @functools.lru_cache(maxsize=None)
    def longest(m: Any) -> int:
        # longest strictly decreasing continuation from m, capped at ``steps``
        best = 0
        for w in metric.weights:
            nxt = metric.met(m, w)
            if nxt in sample and rank(nxt) < rank(m):
                best = max(best, 1 + longest(nxt))
                if best >= steps:
                    return steps
        return best

    if longest(metric.mr) < steps:
        return None
    values, weights = [metric.mr], []
    for left in range(steps, 0, -1):
        m = values[-1]
        for w in metric.weights:
            nxt = metric.met(m, w)
            if nxt in sample and rank(nxt) < rank(m) and longest(nxt) >= left - 1:
                values.append(nxt)
                weights.append(w)
                break
    return values, weights


def _chain_system(metric: RoutingMetric, c: int, edge_weights: list) -> WeightedSystem:
    n = 2 * c + 4
    names = ["r"] + [f"p{i}" for i in range(1, n - 1)] + ["b"]
    edges = [(i, i + 1, edge_weights[i]) for i in range(n - 1)]
    return build_system(names, edges, metric, root=0, byzantine=[n - 1])


def _symmetric_weights(c: int, left: list, center: Any) -> list:
    """Edge weights for the chain p_0..p_{2c+3}: ``left`` on edges 0..c, mirrored on the far side."""
    assert len(left) == c + 1
    return list(left) + [center] + list(reversed(left))


def _initial(system: WeightedSystem, seed: int) -> Configuration:
    rng = random.Random(f"{seed}:initial")
    config = random_configuration(system, rng)
    top = ProcessState(None, system.metric.mr, 0)
    updates = {system.root: top}
    updates.update({b: top for b in system.byzantine})
    return config.replace(updates)


# ---------------------------------------------------------------------------
# waypoint checks


def _split_forest_check(system: WeightedSystem) -> Callable[[Configuration], list[str]]:
    """Every correct process is legitimate with the level of its better designated root."""
    forest = reference_forest(system)
    metric = system.metric

    def check(config: Configuration) -> list[str]:
        problems = []
        for v in system.correct:
            want = forest[v][1]
            if config[v].level != want:
                problems.append(f"{system.names[v]}: level {config[v].level!r}, expected {want!r}")
            elif not check_spec(system, config, v):
                problems.append(f"{system.names[v]}: spec does not hold")
        for b in system.byzantine:
            if config[b].prnt is not None or config[b].level != metric.mr:
                problems.append(f"{system.names[b]} is not in the root state")
        return problems

    return check


def _single_tree_check(system: WeightedSystem) -> Callable[[Configuration], list[str]]:
    """Every process, b included, holds mu(., r) and b hangs below a neighbour."""
    col = mu_from(system, system.root)

    def check(config: Configuration) -> list[str]:
        problems = [
            f"{system.names[v]}: level {config[v].level!r}, expected {col[v]!r}"
            for v in system.processes
            if config[v].level != col[v]
        ]
        for b in system.byzantine:
            if config[b].prnt is None:
                problems.append(f"{system.names[b]} still claims to be a root")
        for v in system.correct:
            if not check_spec(system, config, v):
                problems.append(f"{system.names[v]}: spec does not hold")
        return problems

    return check


def _phases(system: WeightedSystem, symmetry: dict[int, int]) -> list[Phase]:
    split = _split_forest_check(system)
    single = _single_tree_check(system)
    return [
        Phase("mirror-root", lambda: MirrorRoot(symmetry), "rho1", split),
        Phase("behave-correctly", BehaveCorrectly, "rho2", single),
        Phase("reset-root-state", ResetRootState, "rho3", split),
    ]


def _center_property(system: WeightedSystem, c: int) -> None:
    metric = system.metric
    b = system.n - 1
    to_r, to_b = mu_from(system, 0), mu_from(system, b)
    left, right = c + 1, c + 2
    if not (metric.less(to_b[left], to_r[left]) and metric.less(to_r[right], to_b[right])):
        raise ScenarioInapplicable(
            "the centre edge does not separate the two trees: "
            f"mu(p{left}) = {to_r[left]!r}/{to_b[left]!r}, mu(p{right}) = {to_r[right]!r}/{to_b[right]!r}"
        )


def _chain_scenario(name: str, system: WeightedSystem, c: int, seed: int, params: dict) -> Scenario:
    n = system.n
    symmetry = {i: n - 1 - i for i in range(n)}
    return Scenario(
        name=name,
        system=system,
        initial=_initial(system, seed),
        phases=_phases(system, symmetry),
        area=compute_area(system, "radius", c=c),
        symmetry=symmetry,
        params={"c": c, "seed": seed, **params},
    )


def _require_maximizable_or(metric: RoutingMetric, allow: bool) -> None:
    if not allow and not check_properties(metric).maximizable:
        raise ScenarioInapplicable(f"{metric.name} is not maximizable")


def _case1_from_chain(metric: RoutingMetric, c: int, seed: int, name: str, shape: str) -> Scenario:
    chain = decreasing_chain(metric, c + 2)
    if chain is None:
        raise ScenarioInapplicable(
            f"no realizable value chain: {metric.name} has no {c + 3} strictly decreasing values "
            f"reachable from mr (needs c < |M| - 2)"
        )
    values, weights = chain
    system = _chain_system(metric, c, _symmetric_weights(c, weights[: c + 1], weights[c + 1]))
    _center_property(system, c)
    return _chain_scenario(name, system, c, seed, {"shape": shape, "values": values, "weights": weights})


def build_decreasing_chain(metric: RoutingMetric, c: int, seed: int = 0) -> Scenario:
    """Chain p_0=r .. p_{2c+3}=b over a strictly decreasing value chain of length c+3."""
    if c < 0:
        raise ValueError("c must be >= 0")
    _require_maximizable_or(metric, False)
    return _case1_from_chain(metric, c, seed, "theorem5-case1", "chain")


def build_mixed_value_chain(metric: RoutingMetric, c: int, seed: int = 0) -> Scenario:
    """Chain whose r side holds a value m that some weight w preserves and
    some weight w' strictly lowers; the centre edge carries w'."""
    if c < 0:
        raise ValueError("c must be >= 0")
    _require_maximizable_or(metric, False)
    rank = metric.rank
    found = None
    for m in sorted(metric.values, key=lambda x: -rank(x)):
        keep = [w for w in metric.weights if metric.met(m, w) == m]
        drop = [w for w in metric.weights if rank(metric.met(m, w)) < rank(m) and metric.is_value(metric.met(m, w))]
        if not keep or not drop:
            continue
        chain = utility_chain(metric, m)
        if chain is None:
            continue
        k = len(chain[1])
        if found is None or k < found[0]:
            found = (k, m, keep[0], drop[0], chain)
        if k == 0:
            break
    if found is None:
        raise ScenarioInapplicable(f"{metric.name} is strictly decreasing; case 2 does not apply")
    k, m, w, w2, (values, weights) = found
    if k >= c + 2:
        sc = _case1_from_chain(metric, c, seed, "theorem5-case2", "chain-prefix")
        sc.params.update({"m": m, "k": k})
        return sc
    left = list(weights) + [w] * (c + 1 - k)
    system = _chain_system(metric, c, _symmetric_weights(c, left, w2))
    _center_property(system, c)
    return _chain_scenario(
        "theorem5-case2", system, c, seed, {"shape": "S1", "m": m, "k": k, "w": w, "w_prime": w2}
    )


def build_fixed_point_chain(metric: RoutingMetric, c: int, seed: int = 0) -> Scenario:
    """Strictly decreasing metric with no fixed point or with at least two.

    No fixed point: a chain as in case 1.  Two fixed points Y < Y': the r
    side settles on Y, the b side on Y', so b's tree wins the middle.
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    report = check_properties(metric)
    if not report.strictly_decreasing:
        raise ScenarioInapplicable(f"{metric.name} is not strictly decreasing; case 3 does not apply")
    fixed = sorted(report.fixed_points, key=metric.rank)
    if len(fixed) == 1:
        raise ScenarioInapplicable(f"{metric.name} has exactly one fixed point; case 3 does not apply")
    if not fixed:
        return _case1_from_chain(metric, c, seed, "theorem5-case3", "chain")

    best = None
    for i, low in enumerate(fixed):
        for high in fixed[i + 1 :]:
            a, b = utility_chain(metric, low), utility_chain(metric, high)
            if a is None or b is None:
                continue
            cost = max(len(a[1]), len(b[1]))
            if best is None or cost < best[0]:
                best = (cost, low, high, a, b)
    if best is None:
        raise ScenarioInapplicable(f"{metric.name}: fixed points are not reachable from mr")
    _, low, high, (_, w_low), (_, w_high) = best
    k, k2 = len(w_low), len(w_high)
    if k >= c + 2 or k2 >= c + 2:
        sc = _case1_from_chain(metric, c, seed, "theorem5-case3", "chain")
        sc.params.update({"fixed_points": [low, high]})
        return sc

    filler = metric.weights[0]
    n = 2 * c + 4
    edge_w = [filler] * (n - 1)
    edge_w[:k] = w_low
    for i, w in enumerate(w_high):
        edge_w[n - 2 - i] = w
    names = ["r"] + [f"p{i}" for i in range(1, n - 1)] + ["b"]
    system = build_system(names, [(i, i + 1, edge_w[i]) for i in range(n - 1)], metric, 0, [n - 1])
    to_r, to_b = mu_from(system, 0), mu_from(system, n - 1)
    disturbed = [v for v in system.correct if metric.less(to_r[v], high) and to_b[v] == high]
    for v in (c + 1, c + 2):
        if v not in disturbed:
            raise ScenarioInapplicable(f"p{v} would not be disturbed in the two-fixed-point system")
    # no automorphism exists here; b never needs to mirror r because both start at (bottom, mr)
    symmetry = {0: n - 1, n - 1: 0}
    sc = Scenario(
        name="theorem5-case3",
        system=system,
        initial=_initial(system, seed),
        phases=_phases(system, symmetry),
        area=compute_area(system, "radius", c=c),
        symmetry=symmetry,
        params={
            "c": c,
            "seed": seed,
            "shape": "S2",
            "fixed_points": [low, high],
            "k": k,
            "k_prime": k2,
            "disturbed": [system.names[v] for v in disturbed],
        },
    )
    return sc


def build_six_process_gadget(
    metric: RoutingMetric, area: Iterable[str] = (), seed: int = 0
) -> Scenario:
    """Six processes r, u, u', v, v', b; w on r-u, r-u', v-b, v'-b and w' on u-v, u'-v'.

    ``area`` is the tolerated set A, a strict subset of S_B* = {v, v'}.
    """
    rank = metric.rank
    pick = None
    for w in metric.weights:
        m = metric.met(metric.mr, w)
        if not rank(m) < rank(metric.mr):
            continue
        for w2 in metric.weights:
            if rank(metric.met(m, w2)) < rank(m):
                pick = (w, w2)
                break
        if pick:
            break
    if pick is None:
        raise ScenarioInapplicable(
            f"{metric.name}: every met(mr, w) is a fixed point, so S_B* is empty and no strictly "
            "smaller area exists"
        )
    w, w2 = pick
    names = ["r", "u", "u'", "v", "v'", "b"]
    edges = [("r", "u", w), ("r", "u'", w), ("u", "v", w2), ("u'", "v'", w2), ("v", "b", w), ("v'", "b", w)]
    system = build_system(names, edges, metric, root="r", byzantine=["b"])
    star = compute_area(system, "S_B_star")
    wanted = frozenset({system.pid("v"), system.pid("v'")})
    if star.members != wanted:
        raise ScenarioInapplicable(
            f"S_B* = {sorted(system.names[x] for x in star.members)}, expected ['v', \"v'\"]"
        )
    chosen = compute_area(system, "custom", members=list(area))
    if not chosen.members < star.members:
        raise ValueError("the tolerated area must be a strict subset of {v, v'}")
    pid = system.pid
    symmetry = {pid("r"): pid("b"), pid("b"): pid("r"), pid("u"): pid("v"), pid("v"): pid("u"),
                pid("u'"): pid("v'"), pid("v'"): pid("u'")}
    m1 = metric.met(metric.mr, w)
    m2 = metric.met(m1, w2)
    return Scenario(
        name="theorem6",
        system=system,
        initial=_initial(system, seed),
        phases=_phases(system, symmetry),
        area=chosen,
        symmetry=symmetry,
        params={
            "seed": seed,
            "w": w,
            "w_prime": w2,
            "area": sorted(system.names[x] for x in chosen.members),
            "S_B_star": sorted(system.names[x] for x in star.members),
            "rho2_levels": [metric.mr, m1, m2, metric.met(m2, w)],
        },
    )


def build_scenario(name: str, metric: RoutingMetric, c: int = 1, area: Iterable[str] = (), seed: int = 0) -> Scenario:
    if name == "theorem5-case1":
        return build_decreasing_chain(metric, c, seed)
    if name == "theorem5-case2":
        return build_mixed_value_chain(metric, c, seed)
    if name == "theorem5-case3":
        return build_fixed_point_chain(metric, c, seed)
    if name == "theorem6":
        return build_six_process_gadget(metric, area, seed)
    raise ValueError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}")


# ---------------------------------------------------------------------------
# running


def phase_budget(system: WeightedSystem, budget: int | None = None) -> int:
    if budget is not None:
        return budget
    env = os.environ.get("BYZSTAB_BUDGET")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"BYZSTAB_BUDGET must be an integer, got {env!r}") from None
    return 50 * system.n


def run_cycles(
    scenario: Scenario,
    cycles: int,
    seed: int = 0,
    budget: int | None = None,
    protocol: TreeProtocol = TreeProtocol(),
) -> tuple[ExecutionTrace, DisruptionReport, list[dict]]:
    """Run ``cycles`` scripted cycles, checking every waypoint.

    Returns the concatenated trace, its disruption report for the scenario's
    area, and one record per phase (index in the trace, waypoint, levels).
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    system = scenario.system
    limit = phase_budget(system, budget)
    config = scenario.initial
    segments: list[ExecutionTrace] = []
    waypoints: list[dict] = []
    index = 0
    for k in range(cycles):
        for j, phase in enumerate(scenario.phases):
            seg = run(
                system,
                config,
                CentralDaemon(fair=True),
                phase.make_adversary(),
                protocol=protocol,
                max_steps=limit,
                stop="quiescent",
                seed=f"{seed}:{k}:{j}",
            )
            if seg.metadata["stop_reason"] != "quiescent":
                raise BudgetExceeded(
                    f"cycle {k + 1}, phase {phase.name}: not quiescent after {limit} steps "
                    f"(configuration {_describe(system, seg.final)})"
                )
            problems = phase.check(seg.final)
            if problems:
                raise WaypointError(
                    f"cycle {k + 1}: waypoint {phase.waypoint} not reached: {'; '.join(problems)} "
                    f"(configuration {_describe(system, seg.final)})"
                )
            segments.append(seg)
            index += len(seg)
            config = seg.final
            waypoints.append(
                {
                    "cycle": k + 1,
                    "phase": phase.name,
                    "waypoint": phase.waypoint,
                    "index": index,
                    "levels": {system.names[v]: config[v].level for v in system.processes},
                }
            )
    trace = concat_traces(
        segments,
        {
            "scenario": scenario.name,
            "params": scenario.params,
            "cycles": cycles,
            "seed": seed,
            "phase_budget": limit,
        },
    )
    report = count_disruptions(trace, scenario.area, protocol)
    return trace, report, waypoints


def _describe(system: WeightedSystem, config: Configuration) -> str:
    parts = []
    for v in system.processes:
        parent = config.parent(system, v)
        s = config[v]
        parts.append(f"{system.names[v]}=({'-' if parent is None else system.names[parent]}, {s.level!r})")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# example systems on r, A, B, C, D and one Byzantine process b


_EXAMPLE_NODES = ["r", "A", "B", "C", "D", "b"]
_EXAMPLE_EDGES = [("r", "A"), ("r", "B"), ("A", "B"), ("A", "C"), ("A", "D"), ("B", "D"), ("C", "D"), ("C", "b"), ("D", "b")]


def _example(metric: RoutingMetric, weights: Mapping[tuple[str, str], Any]) -> WeightedSystem:
    edges = [(a, b, weights[(a, b)]) for a, b in _EXAMPLE_EDGES]
    return build_system(_EXAMPLE_NODES, edges, metric, root="r", byzantine=["b"])


def _q(x: str) -> Fraction:
    return Fraction(x)


EXAMPLE_SYSTEMS: dict[str, Callable[[], WeightedSystem]] = {
    "sp-contained": lambda: _example(
        builtin_metric("SP"),
        {("r", "A"): 7, ("r", "B"): 6, ("A", "B"): 5, ("A", "C"): 6, ("A", "D"): 10,
         ("B", "D"): 4, ("C", "D"): 8, ("C", "b"): 16, ("D", "b"): 32},
    ),
    "sp-zero-weights": lambda: _example(builtin_metric("SP"), dict.fromkeys(_EXAMPLE_EDGES, 0)),
    "flow-equal-areas": lambda: _example(
        builtin_metric("F", 10),
        {("r", "A"): 7, ("r", "B"): 6, ("A", "B"): 5, ("A", "C"): 6, ("A", "D"): 10,
         ("B", "D"): 4, ("C", "D"): 8, ("C", "b"): 10, ("D", "b"): 10},
    ),
    "flow-nested-areas": lambda: _example(
        builtin_metric("F", 10),
        {("r", "A"): 7, ("r", "B"): 10, ("A", "B"): 6, ("A", "C"): 3, ("A", "D"): 5,
         ("B", "D"): 10, ("C", "D"): 1, ("C", "b"): 10, ("D", "b"): 10},
    ),
    "reliability-equal-areas": lambda: _example(
        builtin_metric("R"),
        {("r", "A"): _q("3/4"), ("r", "B"): _q("3/4"), ("A", "B"): _q("1"), ("A", "C"): _q("2/5"),
         ("A", "D"): _q("4/5"), ("B", "D"): _q("3/10"), ("C", "D"): _q("1"), ("C", "b"): _q("3/4"),
         ("D", "b"): _q("3/4")},
    ),
    "reliability-wide": lambda: _example(
        builtin_metric("R"),
        {("r", "A"): _q("1/4"), ("r", "B"): _q("3/4"), ("A", "B"): _q("1/4"), ("A", "C"): _q("1/4"),
         ("A", "D"): _q("1/2"), ("B", "D"): _q("1"), ("C", "D"): _q("1"), ("C", "b"): _q("1/2"),
         ("D", "b"): _q("3/4")},
    ),
}


def example_system(name: str) -> WeightedSystem:
    try:
        return EXAMPLE_SYSTEMS[name]()
    except KeyError:
        raise ValueError(f"unknown example system {name!r}; expected one of {', '.join(EXAMPLE_SYSTEMS)}") from None
