"""Command-line interface: ``byzstab check-metric | areas | simulate | scenario``.

Exit codes: 0 success, 1 waypoint failure, 2 input error, 3 construction
inapplicable to the metric, 4 step or enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .analysis import check_ta_strict_containment, compute_area, count_disruptions
from .dot import system_to_dot
from .engine import ADVERSARY_KINDS, DAEMON_KINDS, EngineError, make_adversary, make_daemon, run, write_trace
from .io import InputError, dumps, encode_value, load_metric, load_system
from .maxtree import EnumerationBudgetExceeded, brute_force_maximizable
from .metrics import MetricError, builtin_metric, check_properties
from .oracle import OracleBudgetExceeded, mu_table
from .scenarios import (
    SCENARIO_NAMES,
    BudgetExceeded,
    ScenarioInapplicable,
    WaypointError,
    build_scenario,
    run_cycles,
)
from .system import SystemError_, random_configuration

log = logging.getLogger("byzstab")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_WAYPOINT, EXIT_INPUT, EXIT_INAPPLICABLE, EXIT_BUDGET = 0, 1, 2, 3, 4


def _manifest(args: argparse.Namespace) -> dict:
    fields = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    return {"command": args.command, "args": fields, "version": __version__}


def _emit(payload: dict, out: str | None) -> None:
    text = dumps(payload)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _metric_from_args(args: argparse.Namespace):
    if args.builtin:
        return builtin_metric(args.builtin, args.mr, window=args.window, denominator=args.denominator)
    return load_metric(args.file)


def cmd_check_metric(args: argparse.Namespace) -> int:
    metric = _metric_from_args(args)
    report = check_properties(metric)
    payload: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest(args),
        "metric": metric.name,
        "properties": report.to_dict(encode_value),
    }
    if args.brute_force_trials:
        result = brute_force_maximizable(metric, args.max_nodes, args.brute_force_trials, args.seed)
        payload["brute_force"] = {
            "maximizable": result.maximizable,
            "trials": result.trials,
            "counterexample": None if result.counterexample is None else _system_json(result.counterexample),
        }
    _emit(payload, args.out)
    return EXIT_OK


def _system_json(system) -> dict:
    from .io import system_to_dict

    return system_to_dict(system)


def cmd_areas(args: argparse.Namespace) -> int:
    system = load_system(args.graph)
    s_b = compute_area(system, "S_B")
    star = compute_area(system, "S_B_star")
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest(args),
        "metric": system.metric.name,
        "areas": {"S_B": s_b.to_dict(system)["members"], "S_B_star": star.to_dict(system)["members"]},
        "mu": mu_table(system).to_dict(encode_value),
    }
    if args.dot:
        Path(args.dot).write_text(system_to_dot(system, None, s_b, star))
    _emit(payload, args.out)
    return EXIT_OK


def _parse_area(system, text: str):
    kind, _, rest = text.partition(":")
    if kind == "radius":
        try:
            return compute_area(system, "radius", c=int(rest))
        except ValueError:
            raise InputError(f"bad radius in --area {text!r}") from None
    if kind == "custom":
        names = [x for x in rest.split(",") if x]
        try:
            return compute_area(system, "custom", members=names)
        except (SystemError_, ValueError) as exc:
            raise InputError(str(exc)) from exc
    if kind in ("S_B", "S_B_star"):
        return compute_area(system, kind)
    raise InputError(f"--area must be S_B, S_B_star, radius:<c> or custom:<names>, got {text!r}")


def cmd_simulate(args: argparse.Namespace) -> int:
    system = load_system(args.graph)
    area = _parse_area(system, args.area)
    try:
        daemon = make_daemon(args.daemon)
        adversary = make_adversary(args.byz_strategy)
    except EngineError as exc:
        raise InputError(str(exc)) from exc
    initial = random_configuration(system, random.Random(f"{args.seed}:initial"))
    stop = args.stop
    if stop == "auto":
        stop = "max-steps" if args.byz_strategy in ("random", "random-writes") and system.byzantine else "quiescent"
    trace = run(system, initial, daemon, adversary, max_steps=args.max_steps, stop=stop, seed=args.seed)
    report = count_disruptions(trace, area)
    verdict = check_ta_strict_containment(trace, area)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest(args),
        "run": trace.metadata,
        "area": area.to_dict(system),
        "disruptions": report.to_dict(system),
        "containment": verdict.to_dict(),
    }
    if args.trace:
        with open(args.trace, "w") as fh:
            write_trace(trace, fh, args.snapshot_every)
    _emit(payload, args.report)
    return EXIT_OK


def cmd_scenario(args: argparse.Namespace) -> int:
    metric = load_metric(args.metric)
    area = [] if args.area in ("", "empty") else [x for x in args.area.split(",") if x]
    scenario = build_scenario(args.name, metric, c=args.c, area=area, seed=args.seed)
    trace, report, waypoints = run_cycles(scenario, args.cycles, seed=args.seed, budget=args.budget)
    system = scenario.system
    payload = {
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest(args),
        "scenario": scenario.name,
        "params": scenario.params,
        "area": scenario.area.to_dict(system),
        "t": report.total,
        "disruptions": report.to_dict(system),
        "waypoints": waypoints,
        "steps": len(trace),
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trace.jsonl", "w") as fh:
            write_trace(trace, fh)
        s_b = compute_area(system, "S_B")
        star = compute_area(system, "S_B_star")
        for wp in waypoints:
            if wp["cycle"] == 1:
                config = trace.config_at(wp["index"])
                (out / f"{wp['waypoint']}.dot").write_text(system_to_dot(system, config, s_b, star))
        (out / "report.json").write_text(dumps(payload))
    _emit(payload, args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="byzstab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    cm = sub.add_parser("check-metric", help="decide the algebraic properties of a metric")
    src = cm.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="SP, F, R, NC, BFS, MET (or F(<mr>))")
    src.add_argument("--file", help="metric definition JSON")
    cm.add_argument("--mr", type=int, help="mr for the flow metric F")
    cm.add_argument("--window", type=int, default=64, help="sampling window for SP and BFS")
    cm.add_argument("--denominator", type=int, default=16, help="largest denominator of the R grid")
    cm.add_argument("--brute-force-trials", type=int, default=0, help="also sample systems for maximum metric trees")
    cm.add_argument("--max-nodes", type=int, default=6)
    cm.add_argument("--seed", type=int, default=0)
    cm.add_argument("--out", help="write JSON here instead of stdout")
    cm.set_defaults(func=cmd_check_metric)

    ar = sub.add_parser("areas", help="compute S_B and S_B* of a graph")
    ar.add_argument("graph", help="graph JSON")
    ar.add_argument("--dot", help="also write a DOT rendering")
    ar.add_argument("--out", help="write JSON here instead of stdout")
    ar.set_defaults(func=cmd_areas)

    si = sub.add_parser("simulate", help="run the protocol and analyse the trace")
    si.add_argument("graph", help="graph JSON")
    si.add_argument("--daemon", default="central-fair", choices=DAEMON_KINDS)
    si.add_argument("--byz-strategy", default="none", choices=(*ADVERSARY_KINDS, "random"))
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--max-steps", type=int, default=5000)
    si.add_argument("--stop", default="auto", choices=("auto", "quiescent", "max-steps"))
    si.add_argument("--area", default="S_B", help="S_B, S_B_star, radius:<c> or custom:<a,b>")
    si.add_argument("--trace", help="write the JSONL trace here")
    si.add_argument("--snapshot-every", type=int, default=100)
    si.add_argument("--report", help="write the report JSON here instead of stdout")
    si.set_defaults(func=cmd_simulate)

    sc = sub.add_parser("scenario", help="replay an unbounded-disruption construction")
    sc.add_argument("name", choices=SCENARIO_NAMES)
    sc.add_argument("--metric", default="MET", help="builtin name or metric JSON")
    sc.add_argument("--c", type=int, default=1, help="containment radius (chain scenarios)")
    sc.add_argument("--area", default="empty", help="tolerated area for the six-process gadget: empty, v, v' ...")
    sc.add_argument("--cycles", type=int, default=1)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--budget", type=int, help="per-phase step budget (default 50n or $BYZSTAB_BUDGET)")
    sc.add_argument("--out-dir", help="write trace.jsonl, report.json and waypoint DOT files here")
    sc.add_argument("--report", help="write the report JSON here instead of stdout")
    sc.set_defaults(func=cmd_scenario)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InputError, MetricError, SystemError_) as exc:
        print(f"byzstab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScenarioInapplicable as exc:
        print(f"byzstab: inapplicable: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    except (BudgetExceeded, OracleBudgetExceeded, EnumerationBudgetExceeded) as exc:
        print(f"byzstab: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except WaypointError as exc:
        print(f"byzstab: waypoint failure: {exc}", file=sys.stderr)
        return EXIT_WAYPOINT
    except ValueError as exc:
        print(f"byzstab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
