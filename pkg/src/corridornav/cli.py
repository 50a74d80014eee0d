"""Command-line entry point.

Subcommands cover the batch workflows: route planning on a waypoint
graph, replaying a recorded trace through the wayfinding tracker,
building and simplifying walk records, replaying a return trace against
a record, running full simulated scenarios, and aggregating metrics.

Given identical arguments, inputs and seed, every output file is byte
identical; wall-clock timing and timestamps are confined to meta.json.
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .backtrack import dump_record, load_record, simplify
from .config import default_config, load_config
from .errors import CorridorNavError
from .evaluate import evaluate_result
from .guidance import describe_route
from .route_graph import RouteLeg, load_route_graph, shortest_route
from .session import record_from_trace, run_backtrack_return, run_wayfinding
from .sim import (
    builtin_scenario_names,
    load_scenario,
    render_svg,
    write_builtin_scenarios,
)
from .sim.runner import ScenarioRunner
from .trace import read_trace, write_trace


def _fail(message: str) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(1)


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise _fail(f"file not found: {path}")
    try:
        return p.read_text()
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from exc


def _read_json(path: str) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail(f"{path} is not valid JSON: {exc}") from exc


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _out_dir(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, args, wall_seconds: float, extra: dict | None = None) -> None:
    # The only file that may differ between identical runs.
    meta = {
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "argv": sys.argv[1:],
        "wall_seconds": wall_seconds,
    }
    if extra:
        meta.update(extra)
    (out / "meta.json").write_text(_json_text(meta))


def _load_config_arg(args):
    if getattr(args, "config", None) is None:
        return default_config()
    _read_text(args.config)  # distinct not-found message before parsing
    return load_config(args.config)


def _guidance_log_doc(state) -> list[dict]:
    return [
        {"time_s": e.time_s, "kind": e.kind, "status": e.status, "text": e.text}
        for e in state.log
    ]


def _graph_from_doc(doc: dict, path: str):
    if "waypoints" in doc:
        return load_route_graph(doc)
    if "graph" in doc:
        return load_route_graph(doc["graph"])
    raise _fail(f"{path} has no waypoint graph")


def _route_doc(graph, route, units: str, step_length_m: float) -> dict:
    ids = route.waypoint_ids
    legs = []
    for i in range(len(ids) - 1):
        seg = graph.segments[graph.segment_between(ids[i], ids[i + 1])]
        turn = route.turns[i] if i < len(route.turns) else None
        legs.append({"to": ids[i + 1], "length_m": seg.length, "turn": turn})
    leg_tuples = [RouteLeg(l["length_m"], l["turn"], l["to"]) for l in legs]
    return {
        "from": route.start,
        "to": route.goal,
        "waypoints": ids,
        "length_m": route.length,
        "legs": legs,
        "description": describe_route(leg_tuples, units, step_length_m),
    }


def _cmd_plan(args) -> int:
    doc = _read_json(args.map)
    graph = _graph_from_doc(doc, args.map)
    route = shortest_route(graph, args.from_id, args.to_id)
    route_doc = _route_doc(graph, route, args.units, args.step_length)
    print(f"route {route.start} -> {route.goal}: "
          f"{route.length:.1f} m, {len(route.waypoint_ids)} waypoints")
    for k, leg in enumerate(route_doc["legs"], start=1):
        line = f"  {k}. walk {leg['length_m']:.1f} m to {leg['to']}"
        if leg["turn"] and leg["turn"] != "straight":
            line += f", then turn {leg['turn']}"
        print(line)
    print(route_doc["description"])
    out = _out_dir(args)
    if out is not None:
        t0 = time.perf_counter()
        (out / "route.json").write_text(_json_text(route_doc))
        _write_meta(out, args, time.perf_counter() - t0)
        print(f"wrote {out / 'route.json'}")
    return 0


def _estimates_csv(rows) -> str:
    lines = ["step,x,y,ess,reset"]
    for r in rows:
        lines.append(f"{r.step_index},{r.x:.6f},{r.y:.6f},{r.ess:.3f},"
                     f"{1 if r.reset else 0}")
    return "\n".join(lines) + "\n"


def _truth_csv(truth) -> str:
    lines = ["step,x,y"]
    for k, (x, y) in enumerate(np.asarray(truth, dtype=float), start=1):
        lines.append(f"{k},{x:.6f},{y:.6f}")
    return "\n".join(lines) + "\n"


def _cmd_track(args) -> int:
    t0 = time.perf_counter()
    from .geometry import load_floor_plan

    trace = read_trace(_read_text(args.trace))
    plan = load_floor_plan(_read_json(args.map))
    graph = _graph_from_doc(_read_json(args.graph), args.graph)
    route = shortest_route(graph, args.from_id, args.to_id)
    config = _load_config_arg(args)
    if args.known_heading is not None:
        heading = math.radians(args.known_heading)
    else:
        a = np.asarray(graph.waypoints[route.waypoint_ids[0]], dtype=float)
        b = np.asarray(graph.waypoints[route.waypoint_ids[1]], dtype=float)
        heading = math.atan2(b[1] - a[1], b[0] - a[0])
    session = run_wayfinding(trace, plan, graph, route, args.step_length,
                             heading, config, seed=args.seed,
                             velocity_multiplier=args.velocity_multiplier)
    resets = sum(1 for r in session.estimate_rows if r.reset)
    summary = {
        "arrived": bool(session.arrived),
        "steps": len(session.estimate_rows),
        "filter_resets": resets,
        "notifications_emitted": sum(1 for e in session.guidance.log
                                     if e.status == "emitted"),
        "final_estimate": ([session.estimate_rows[-1].x, session.estimate_rows[-1].y]
                           if session.estimate_rows else None),
    }
    print(f"tracked {summary['steps']} steps; arrived={summary['arrived']}; "
          f"resets={resets}")
    out = _out_dir(args)
    if out is not None:
        (out / "estimates.csv").write_text(_estimates_csv(session.estimate_rows))
        (out / "notifications.json").write_text(
            _json_text(_guidance_log_doc(session.guidance)))
        (out / "summary.json").write_text(_json_text(summary))
        if args.plot:
            est = [(r.x, r.y) for r in session.estimate_rows]
            (out / "plot.svg").write_text(
                render_svg(plan=plan, estimate=est, title="tracked walk"))
        _write_meta(out, args, time.perf_counter() - t0)
        print(f"wrote {out}")
    return 0


def _cmd_record(args) -> int:
    trace = read_trace(_read_text(args.trace))
    record = record_from_trace(trace, args.step_length)
    print(f"recorded {record.total_steps} steps, "
          f"{len(record.segments)} segments, {len(record.turns)} turns")
    if args.output is not None:
        Path(args.output).write_text(dump_record(record) + "\n")
        print(f"wrote {args.output}")
    else:
        print(dump_record(record))
    return 0


def _cmd_simplify(args) -> int:
    record = load_record(_read_json(args.record))
    simplified = simplify(record, args.radius)
    print(f"{record.total_steps} steps / {len(record.segments)} segments -> "
          f"{simplified.total_steps} steps / {len(simplified.segments)} segments"
          f"{' (lossy)' if simplified.lossy else ''}")
    if args.output is not None:
        Path(args.output).write_text(dump_record(simplified) + "\n")
        print(f"wrote {args.output}")
    else:
        print(dump_record(simplified))
    return 0


def _return_rows_csv(rows) -> str:
    lines = ["step,way_in_index,cost,layer_deg,reliable,position_steps,"
             "divergence_steps,lost"]
    for r in rows:
        lines.append(
            f"{r.step_index},{r.way_in_index},{r.cost:.6f},{r.layer_deg},"
            f"{1 if r.reliable else 0},{r.position_steps:.3f},"
            f"{r.divergence_steps:.3f},{1 if r.lost else 0}")
    return "\n".join(lines) + "\n"


def _cmd_return(args) -> int:
    t0 = time.perf_counter()
    record = load_record(_read_json(args.record))
    trace = read_trace(_read_text(args.trace))
    config = _load_config_arg(args)
    session = run_backtrack_return(record, trace, config=config)
    rows = session.rows
    reliable = sum(1 for r in rows if r.reliable)
    summary = {
        "arrived": bool(session.arrived),
        "lost": bool(session.lost),
        "return_steps": len(rows),
        "reliable_fraction": (reliable / len(rows)) if rows else 0.0,
        "notifications_emitted": sum(1 for e in session.guidance.log
                                     if e.status == "emitted"),
    }
    print(f"return walk: {len(rows)} steps; arrived={session.arrived}; "
          f"lost={session.lost}; reliable {reliable}/{len(rows)}")
    out = _out_dir(args)
    if out is not None:
        (out / "return_rows.csv").write_text(_return_rows_csv(rows))
        (out / "notifications.json").write_text(
            _json_text(_guidance_log_doc(session.guidance)))
        (out / "summary.json").write_text(_json_text(summary))
        _write_meta(out, args, time.perf_counter() - t0)
        print(f"wrote {out}")
    return 0


def _write_sim_result(result, runner, out: Path, plot: bool) -> None:
    metrics = evaluate_result(result)
    metrics.pop("wall_seconds", None)  # timing lives in meta.json only
    (out / "metrics.json").write_text(_json_text(metrics))
    (out / "scenario.json").write_text(_json_text(runner.doc))
    (out / "trace.csv").write_text(write_trace(result.trace))
    (out / "truth.csv").write_text(_truth_csv(result.truth))
    (out / "notifications.json").write_text(
        _json_text(_guidance_log_doc(result.session.guidance)))
    if result.notes.get("gestures"):
        (out / "gestures.json").write_text(_json_text(result.notes["gestures"]))
    if result.pipeline == "wayfinding":
        (out / "estimates.csv").write_text(
            _estimates_csv(result.session.estimate_rows))
    else:
        (out / "return_rows.csv").write_text(
            _return_rows_csv(result.session.rows))
        (out / "record.json").write_text(dump_record(result.record) + "\n")
        (out / "simplified.json").write_text(
            dump_record(result.simplified) + "\n")
    if plot:
        estimate = None
        way_in = None
        if result.pipeline == "wayfinding":
            estimate = [(r.x, r.y) for r in result.session.estimate_rows]
        else:
            way_in = result.phase_logs[0].truth
        (out / "plot.svg").write_text(
            render_svg(plan=result.plan, truth=result.truth,
                       estimate=estimate, way_in=way_in, title=result.name))


def _cmd_simulate(args) -> int:
    if args.batch:
        names = builtin_scenario_names()
    elif args.scenario is not None:
        names = [args.scenario]
    else:
        raise _usage("simulate needs --scenario or --batch")
    base = _out_dir(args) or Path("results")
    base.mkdir(parents=True, exist_ok=True)
    status = 0
    for k, name in enumerate(names):
        doc = load_scenario(name)
        seed = args.seed
        if args.batch and seed is not None:
            seed = seed + k  # per-scenario derived seed
        runner = ScenarioRunner(doc, seed)
        result = runner.run()
        out = base / result.name
        out.mkdir(parents=True, exist_ok=True)
        _write_sim_result(result, runner, out, args.plot)
        _write_meta(out, args, result.wall_seconds, extra={"seed": runner.seed})
        expected = result.expected_outcome
        marker = ""
        if expected is not None:
            marker = " (as expected)" if result.outcome == expected else \
                     f" (EXPECTED {expected})"
            if result.outcome != expected:
                status = 1
        print(f"{result.name}: {result.outcome}{marker} -> {out}")
    return status


def _cmd_evaluate(args) -> int:
    files: list[Path] = []
    for raw in args.paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("**/metrics.json")))
        elif p.exists():
            files.append(p)
        else:
            raise _fail(f"file not found: {raw}")
    if not files:
        raise _fail("no metrics.json files found under the given paths")
    outcomes: dict[str, int] = {}
    rows = []
    for f in files:
        doc = _read_json(str(f))
        outcome = doc.get("outcome", "unknown")
        outcomes[outcome] = outcomes.get(outcome, 0) + 1
        rows.append(doc)
        err = doc.get("filter_error", {}).get("final_m")
        err_text = f", final error {err:.2f} m" if err is not None else ""
        print(f"{doc.get('scenario', f.name)}: {outcome}{err_text}")
    aggregate = {
        "runs": len(rows),
        "outcomes": dict(sorted(outcomes.items())),
        "scenarios": [doc.get("scenario") for doc in rows],
    }
    print(f"total {len(rows)} runs: "
          + ", ".join(f"{v} {k}" for k, v in sorted(outcomes.items())))
    out = _out_dir(args)
    if out is not None:
        (out / "aggregate.json").write_text(_json_text(aggregate))
        print(f"wrote {out / 'aggregate.json'}")
    return 0


def _cmd_scenarios(args) -> int:
    if args.write_dir is not None:
        paths = write_builtin_scenarios(args.write_dir)
        for p in paths:
            print(p)
    else:
        for name in builtin_scenario_names():
            print(name)
    return 0


class _Usage(Exception):
    pass


def _usage(message: str) -> _Usage:
    return _Usage(message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corridornav",
        description="Indoor corridor navigation toolkit: plan routes, replay "
                    "traces through the trackers, and run simulated scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="shortest route between two waypoints")
    p.add_argument("--map", required=True,
                   help="waypoint graph JSON (or scenario file with a graph)")
    p.add_argument("--from", dest="from_id", required=True, metavar="ID",
                   help="start waypoint id")
    p.add_argument("--to", dest="to_id", required=True, metavar="ID",
                   help="goal waypoint id")
    p.add_argument("--units", default="meters",
                   choices=["meters", "feet", "steps"],
                   help="units for the spoken description")
    p.add_argument("--step-length", type=float, default=0.65,
                   help="step length in meters, used for step units")
    p.add_argument("--out", help="directory for route.json")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("track", help="run the wayfinding tracker on a trace")
    p.add_argument("--trace", required=True, help="sensor trace CSV")
    p.add_argument("--map", required=True, help="floor plan JSON")
    p.add_argument("--graph", required=True, help="waypoint graph JSON")
    p.add_argument("--from", dest="from_id", required=True, metavar="ID")
    p.add_argument("--to", dest="to_id", required=True, metavar="ID")
    p.add_argument("--step-length", type=float, required=True,
                   help="calibrated step length in meters")
    p.add_argument("--known-heading", type=float, default=None,
                   help="initial walking heading in degrees (default: first leg)")
    p.add_argument("--velocity-multiplier", type=float, default=1.0)
    p.add_argument("--config", help="config JSON overriding defaults")
    p.add_argument("--seed", type=int, default=0, help="filter RNG seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--plot", action="store_true", help="write plot.svg")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("record", help="build a walk record from a trace")
    p.add_argument("--trace", required=True, help="sensor trace CSV")
    p.add_argument("--step-length", type=float, required=True)
    p.add_argument("--output", help="record file to write (default: stdout)")
    p.set_defaults(func=_cmd_record)

    p = sub.add_parser("simplify", help="cut spurs and loops from a record")
    p.add_argument("--record", required=True, help="walk record JSON")
    p.add_argument("--radius", type=int, default=7,
                   help="uncertainty radius in steps")
    p.add_argument("--output", help="record file to write (default: stdout)")
    p.set_defaults(func=_cmd_simplify)

    p = sub.add_parser("return", help="guide a return trace against a record")
    p.add_argument("--record", required=True, help="walk record JSON")
    p.add_argument("--trace", required=True, help="return sensor trace CSV")
    p.add_argument("--config", help="config JSON overriding defaults")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_return)

    p = sub.add_parser("simulate", help="run a simulated scenario end to end")
    p.add_argument("--scenario",
                   help="builtin scenario name or scenario JSON file")
    p.add_argument("--batch", action="store_true",
                   help="run every builtin scenario")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--out", help="results directory (default: results)")
    p.add_argument("--plot", action="store_true", help="write plot.svg")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="aggregate metrics from past runs")
    p.add_argument("paths", nargs="+",
                   help="metrics.json files or results directories")
    p.add_argument("--out", help="directory for aggregate.json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("scenarios", help="list or export builtin scenarios")
    p.add_argument("--write-dir", help="write scenario JSON files here")
    p.set_defaults(func=_cmd_scenarios)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except _Usage as exc:
        parser.error(str(exc))  # exits 2
    except CorridorNavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
