"""Command line entry point: ``airmatrix <subcommand> ...``.

Exit status is 0 on success, 1 when some flights could not be planned and
2 on usage or configuration errors.  Diagnostics go to stderr; data goes to
files or stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import __version__
from .batch import (
    ScenarioConfig,
    build_environment,
    dump_plans_csv,
    generate_scenario,
    load_scenario,
    read_plans,
    write_plans,
)
from .exceptions import AirMatrixError, PlanningError
from .grid import GridSpec, block_of_point, load_grid
from .occupancy import save_buildings
from .performance import default_fleet, load_fleet
from .reporting import (
    compare,
    conflict_curve,
    delay_report,
    density_sweep,
    heatmap,
    plot_heatmaps,
    write_conflict_curve,
    write_delays,
    write_heatmaps,
    write_sweep,
)
from .search import TimeTable, astar_trajectory, cfa_star, reserve_trajectory
from .trajectory import dumps_jsonl, read_jsonl

log = logging.getLogger("airmatrix")

EXIT_OK, EXIT_FAILURES, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _scenario(args) -> tuple[ScenarioConfig, dict]:
    """Scenario file plus command-line overrides; also returns input digests."""
    digests = {}
    if getattr(args, "scenario", None):
        cfg = load_scenario(args.scenario)
        digests[os.path.basename(args.scenario)] = _digest(args.scenario)
    else:
        cfg = ScenarioConfig()
    overrides = {}
    for flag, key in (("seed", "seed"), ("count", "count"), ("window", "window"),
                      ("scale", "scale"), ("hover_threshold", "hover_threshold"), ("dt", "dt"),
                      ("fleet", "fleet"), ("buildings", "buildings")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, "grid", None):
        overrides["grid"] = load_grid(args.grid).to_dict()
        digests[os.path.basename(args.grid)] = _digest(args.grid)
    if overrides:
        cfg = cfg.replace(**overrides)
    for key in ("fleet", "buildings"):
        path = getattr(cfg, key)
        if path and path != "synthetic":
            digests[os.path.basename(path)] = _digest(path)
    return cfg, digests


def _write(path, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)


# -- subcommands --------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg, _ = _scenario(args)
    env = build_environment(cfg)
    plans = generate_scenario(cfg, env)
    if args.out:
        write_plans(plans, args.out)
    else:
        dump_plans_csv(plans, sys.stdout)
    if args.buildings_out:
        save_buildings(env.footprints, args.buildings_out)
    log.info("generated %d plans", len(plans))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    fleet = load_fleet(args.fleet) if args.fleet else default_fleet()
    grid = load_grid(args.grid) if args.grid else GridSpec()
    scale = 0.6 if args.scale is None else args.scale
    out = {}
    for name, perf in fleet.items():
        tt = TimeTable.build(perf, grid, scale)
        lengths = {"x00": grid.a, "0y0": grid.a, "00z": grid.h,
                   "xy0": 2 ** 0.5 * grid.a, "x0z": (grid.a**2 + grid.h**2) ** 0.5,
                   "0yz": (grid.a**2 + grid.h**2) ** 0.5,
                   "xyz": (2 * grid.a**2 + grid.h**2) ** 0.5}
        times = {"x00": tt.t_x00, "0y0": tt.t_0y0, "00z": tt.t_00z, "xy0": tt.t_xy0,
                 "x0z": tt.t_x0z, "0yz": tt.t_0yz, "xyz": tt.t_xyz}
        out[name] = {
            "m": perf.m, "v_mv": perf.v_mv, "v_mh": perf.v_mh,
            "e": perf.e, "P_max": perf.P_max, "scale": scale,
            "link_speeds": {d: lengths[d] / times[d] for d in times},
            "link_times": times,
        }
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg, _ = _scenario(args)
    env = build_environment(cfg)
    if args.aircraft not in env.fleet:
        raise ConfigError(f"aircraft {args.aircraft!r} not in fleet {sorted(env.fleet)}")
    perf = env.fleet[args.aircraft]
    start = block_of_point(args.origin, env.grid)
    goal = block_of_point(args.destination, env.grid)
    try:
        if args.planner == "astar":
            traj = astar_trajectory(env.grid, env.static, start, goal, perf, env.scale,
                                    args.t_dep, flight_id=args.id, aircraft=args.aircraft)
        else:
            ledger = env.fresh_ledger()
            if args.against:
                for t in read_jsonl(args.against):
                    t.landing_hold = env.landing_hold
                    reserve_trajectory(ledger, t)
            traj = cfa_star(env.grid, ledger, start, goal, perf, env.scale, args.t_dep,
                            env.hover_threshold, env.landing_hold, env.ground_hold,
                            flight_id=args.id, aircraft=args.aircraft)
    except PlanningError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURES
    sys.stdout.write(dumps_jsonl([traj]))
    return EXIT_OK


def _manifest(cfg, digests, artifacts, out_dir) -> dict:
    return {
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "inputs": dict(sorted(digests.items())),
        "artifacts": {os.path.relpath(p, out_dir): _digest(p) for p in sorted(artifacts)},
    }


def cmd_batch(args) -> int:
    cfg, digests = _scenario(args)
    env = build_environment(cfg)
    if args.plans:
        plans = read_plans(args.plans)
        digests[os.path.basename(args.plans)] = _digest(args.plans)
    else:
        plans = generate_scenario(cfg, env)
    os.makedirs(args.out, exist_ok=True)
    baseline, cfa, report = compare(plans, env, cfg.dt, jobs=args.jobs or 1)
    paths = []

    def out(name):
        p = os.path.join(args.out, name)
        paths.append(p)
        return p

    write_plans(plans, out("plans.csv"))
    _write(out("trajectories.jsonl"), dumps_jsonl(baseline) + dumps_jsonl(cfa))
    write_delays(report, out("delays.csv"))
    write_conflict_curve(report.conflict_curve, out("conflict_curve.csv"))
    hm = heatmap(cfa, env.grid)
    for k in range(env.grid.K):
        _write(out(f"heatmap_{k}.json"), hm.to_json(k))
    summary = {
        "flights": len(plans),
        "baseline_planned": len(baseline),
        "cfa_planned": len(cfa),
        "failures": report.failures,
        "total_delay_s": report.total_delay,
        "baseline_conflict_block_seconds": report.total_conflict,
        "baseline_conflict_events": report.conflict_events,
        "cfa_conflict_block_seconds": conflict_curve(cfa, cfg.dt)[-1] if cfa else 0.0,
        "max_flight_time_s": max((t.flight_time for t in cfa), default=0.0),
    }
    _write(out("summary.json"), json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if args.timings:
        with open(os.path.join(args.out, "timings.csv"), "w") as fh:
            fh.write("n,astar_s,cfastar_s\n")
            for n, (b, c) in enumerate(zip(report.baseline_seconds, report.cfa_seconds)):
                fh.write(f"{n},{b!r},{c!r}\n")
    manifest = _manifest(cfg, digests, paths, args.out)
    _write(os.path.join(args.out, "manifest.json"),
           json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("planned %d/%d flights conflict-free; total delay %.1f s",
             len(cfa), len(plans), report.total_delay)
    return EXIT_FAILURES if len(cfa) < len(plans) or len(baseline) < len(plans) else EXIT_OK


def cmd_sweep(args) -> int:
    cfg, digests = _scenario(args)
    rows = density_sweep(args.windows, cfg)
    os.makedirs(args.out, exist_ok=True)
    p = os.path.join(args.out, "sweep.csv")
    write_sweep(rows, p)
    manifest = _manifest(cfg, digests, [p], args.out)
    manifest["windows"] = list(args.windows)
    _write(os.path.join(args.out, "manifest.json"),
           json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _select(trajs, planner):
    return [t for t in trajs if planner is None or t.planner == planner]


def cmd_heatmap(args) -> int:
    cfg, _ = _scenario(args)
    trajs = _select(read_jsonl(args.trajectories), args.planner)
    hm = heatmap(trajs, cfg.grid_spec)
    os.makedirs(args.out, exist_ok=True)
    write_heatmaps(hm, args.out)
    if args.plot:
        if not plot_heatmaps(hm, args.out, args.plot):
            log.warning("matplotlib unavailable; wrote heatmap data only")
    fractions = hm.layer_fractions()
    print(json.dumps({"layer_fractions": [float(f) for f in fractions]}))
    return EXIT_OK


def cmd_compare(args) -> int:
    baseline = _select(read_jsonl(args.baseline), None if args.cfa else "astar")
    cfa = _select(read_jsonl(args.cfa or args.baseline), None if args.cfa else "cfastar")
    dt = 1.0 if args.dt is None else args.dt
    ok = {t.flight_id for t in cfa}
    paired = [t for t in baseline if t.flight_id in ok]
    report = delay_report(paired, [t for t in cfa if t.flight_id in {p.flight_id for p in paired}])
    os.makedirs(args.out, exist_ok=True)
    write_delays(report, os.path.join(args.out, "delays.csv"))
    write_conflict_curve(conflict_curve(baseline, dt), os.path.join(args.out, "conflict_curve.csv"))
    missing = len(baseline) - len(paired)
    if missing:
        log.warning("%d baseline flights have no conflict-free counterpart", missing)
    return EXIT_FAILURES if missing else EXIT_OK


# -- parser -------------------------------------------------------------------


def _point(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="airmatrix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p, planning=True):
        p.add_argument("--scenario", help="scenario config JSON")
        p.add_argument("--grid", help="grid JSON {origin, a, h, I, J, K}")
        p.add_argument("--fleet", help="fleet JSON {name: {m, v_mv, v_mh}}")
        p.add_argument("--buildings", help="buildings JSON, or 'synthetic'")
        p.add_argument("--seed", type=int)
        if planning:
            p.add_argument("--scale", type=float, help="speed fraction (default 0.6)")
            p.add_argument("--hover-threshold", type=float, help="max hover in s (default 60)")
            p.add_argument("--dt", type=float, help="metric sampling step in s (default 1.0)")
            p.add_argument("--jobs", type=int, default=1, help="parallel baseline workers")

    p = sub.add_parser("gen", help="generate random flight plans")
    scenario_flags(p, planning=False)
    p.add_argument("--count", type=int)
    p.add_argument("--window", type=float)
    p.add_argument("--out", help="plans file (.csv or .json); stdout when omitted")
    p.add_argument("--buildings-out", help="also write the scenario's buildings JSON")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("calibrate", help="print calibrated performance and link speeds")
    p.add_argument("--fleet")
    p.add_argument("--grid")
    p.add_argument("--scale", type=float)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("plan", help="plan a single flight")
    scenario_flags(p)
    p.add_argument("--from", dest="origin", type=_point, required=True, metavar="X,Y,Z")
    p.add_argument("--to", dest="destination", type=_point, required=True, metavar="X,Y,Z")
    p.add_argument("--t-dep", type=float, default=0.0)
    p.add_argument("--aircraft", default="DJI Phantom 4")
    p.add_argument("--id", default="F0")
    p.add_argument("--planner", choices=("astar", "cfastar"), default="cfastar")
    p.add_argument("--against", help="trajectories JSONL already occupying the airspace")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("batch", help="plan a scenario with both planners and report")
    scenario_flags(p)
    p.add_argument("--count", type=int)
    p.add_argument("--window", type=float)
    p.add_argument("--plans", help="flight plans file instead of generating them")
    p.add_argument("--out", required=True)
    p.add_argument("--timings", action="store_true", help="also write wall-clock timings.csv")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("sweep", help="departure-window density sweep")
    scenario_flags(p)
    p.add_argument("--count", type=int)
    p.add_argument("--windows", type=float, nargs="+", default=[180, 240, 300, 420, 600])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("heatmap", help="per-layer utilisation from trajectories")
    scenario_flags(p, planning=False)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--planner", choices=("astar", "cfastar"), default="cfastar")
    p.add_argument("--out", required=True)
    p.add_argument("--plot", nargs="?", const="png", choices=("png", "svg"))
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("compare", help="delay and conflict curves from trajectory files")
    p.add_argument("--baseline", required=True, help="A* trajectories (or a mixed batch file)")
    p.add_argument("--cfa", help="conflict-free trajectories")
    p.add_argument("--dt", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, AirMatrixError, ValueError, KeyError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
