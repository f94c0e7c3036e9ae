"""``riskocc`` command line.

Exit codes: 0 success, 64 usage, 1 validation, 2 I/O, 3 planning.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data_path
from .braking import (
    BrakingConfig,
    load_braking_scenario,
    report_csv,
    report_summary,
    run_study,
)
from .config import Settings, load_settings
from .edge_service import EdgeService, initial_state, make_tcp_server
from .geometry import Point2
from .occupancy import RasterError, compute_map, export_grid, samples_for_prior
from .planner import PlanningError, collision_free, plan
from .render import export_overlay, export_ppm, plot_braking_study, plot_risk_map
from .scenario import Maneuver, ScenarioError, load_frames, load_map_prior

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_PLANNING, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _point(text: str) -> Point2:
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}") from None
    return Point2(x, y)


def _range(text: str) -> slice:
    try:
        a, b = text.split(":")
        return slice(int(a) if a else None, int(b) if b else None)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--map-prior", type=Path, help="map prior JSON")
    common.add_argument("--frames", type=Path, help="frame stream (JSON lines)")
    common.add_argument("--config", type=Path, help="TOML or JSON config; RISKOCC_CONFIG overrides")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")

    p = _Parser(prog="riskocc", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("map", parents=[common], help="compute one frame's risk grid")
    m.add_argument("--frame", type=int, default=0)
    m.add_argument("--format", action="append", choices=["csv", "pgm", "ppm"], dest="formats")
    m.add_argument("--scale", choices=["minmax", "fixed"], default="minmax")
    m.add_argument("--figures", action="store_true", help="also render a PNG figure")

    pl = sub.add_parser("plan", parents=[common], help="plan a path on one frame")
    pl.add_argument("--frame", type=int, default=0)
    pl.add_argument("--maneuver", choices=[v.value for v in Maneuver])
    pl.add_argument("--icv", type=_point, help="ICV position X,Y (default: frame's icv entry)")
    pl.add_argument("--dest", type=_point)
    pl.add_argument("--strategy", choices=["local", "global"])
    pl.add_argument("--scale", choices=["minmax", "fixed"], default="minmax")
    pl.add_argument("--figures", action="store_true")

    r = sub.add_parser("replay", parents=[common], help="grid + plan for every frame")
    r.add_argument("--range", type=_range, default=slice(None))
    r.add_argument("--maneuver", choices=[v.value for v in Maneuver])
    r.add_argument("--icv", type=_point)
    r.add_argument("--strategy", choices=["local", "global"])
    r.add_argument("--scale", choices=["minmax", "fixed"], default="fixed")
    r.add_argument("--jobs", type=int, default=1, help="frames processed in parallel")
    r.add_argument("--figures", action="store_true")

    s = sub.add_parser("serve", parents=[common], help="run the edge service")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--listen", metavar="HOST:PORT")
    g.add_argument("--pipe", action="store_true", help="serve stdin -> stdout")

    e = sub.add_parser("eval", parents=[common], help="braking study")
    e.add_argument("--scenario", type=Path, default=None, help="default: bundled quant_leftturn.jsonl")
    e.add_argument("--v0", type=float)
    e.add_argument("--amax", type=float)
    return p


def _settings(args) -> Settings:
    path = os.environ.get("RISKOCC_CONFIG") or args.config
    return load_settings(path)


def _require(args, *names):
    for n in names:
        if getattr(args, n.replace("-", "_")) is None:
            raise UsageError(f"--{n} is required for '{args.command}'")


def _frame(frames, idx):
    if not 0 <= idx < len(frames):
        raise UsageError(f"--frame {idx} out of range (0..{len(frames) - 1})")
    return frames[idx]


def _plan_frame(prior, samples, frame, settings, maneuver, icv, dest):
    res = prior.sampling.resolution if prior.sampling else 1.9
    grid = compute_map(samples, frame, prior.statics, settings.risk, resolution=res)
    if maneuver not in prior.maneuver_sets:
        raise PlanningError(f"map prior has no {maneuver.value!r} node set")
    free = collision_free(prior.maneuver_sets[maneuver], grid, settings.planner.risk_threshold)
    return grid, plan(free, icv, dest, maneuver, settings.planner)


def _resolve_icv(args, frame):
    maneuver = args.maneuver or (frame.icv.maneuver.value if frame.icv and frame.icv.maneuver else None)
    icv = args.icv or (frame.icv.position if frame.icv else None)
    if maneuver is None or icv is None:
        raise UsageError("--maneuver and --icv are required when the frame carries no icv entry")
    return Maneuver(maneuver), icv


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def _path_json(path, grid_t) -> bytes:
    doc = path.to_dict()
    doc["grid_t"] = grid_t
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def cmd_map(args, settings) -> int:
    _require(args, "map-prior", "frames")
    prior = load_map_prior(args.map_prior, settings.risk.weights)
    frames = load_frames(args.frames, prior.origin)
    frame = _frame(frames, args.frame)
    res = prior.sampling.resolution if prior.sampling else 1.9
    grid = compute_map(samples_for_prior(prior), frame, prior.statics, settings.risk, resolution=res)
    stem = args.out / f"grid_{args.frame:04d}"
    for fmt in args.formats or ["csv", "pgm"]:
        if fmt == "ppm":
            data = export_ppm(grid, args.scale)
        else:
            data = export_grid(grid, fmt, args.scale)
        _write(stem.with_suffix("." + fmt), data)
        print(stem.with_suffix("." + fmt))
    if args.figures:
        print(plot_risk_map(grid, stem.with_suffix(".png")))
    return EXIT_OK


def cmd_plan(args, settings) -> int:
    _require(args, "map-prior", "frames")
    if args.strategy:
        settings = replace(settings, planner=replace(settings.planner, strategy=args.strategy))
    prior = load_map_prior(args.map_prior, settings.risk.weights)
    frames = load_frames(args.frames, prior.origin)
    frame = _frame(frames, args.frame)
    maneuver, icv = _resolve_icv(args, frame)
    try:
        grid, path = _plan_frame(prior, samples_for_prior(prior), frame, settings, maneuver, icv, args.dest)
    except PlanningError as exc:
        print(f"riskocc: {getattr(exc, 'code', 'PLANNING_ERROR')}: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    stem = args.out / f"path_{args.frame:04d}"
    _write(stem.with_suffix(".json"), _path_json(path, grid.timestamp))
    _write(args.out / f"overlay_{args.frame:04d}.ppm", export_overlay(grid, [n.position for n in path.raw_nodes], args.scale))
    if args.figures:
        plot_risk_map(grid, args.out / f"overlay_{args.frame:04d}.png", path)
    print(f"status={path.status} nodes={len(path.raw_nodes)} total_cost={path.total_cost:.6f}")
    return EXIT_OK


def cmd_replay(args, settings) -> int:
    _require(args, "map-prior", "frames")
    if args.strategy:
        settings = replace(settings, planner=replace(settings.planner, strategy=args.strategy))
    prior = load_map_prior(args.map_prior, settings.risk.weights)
    frames = load_frames(args.frames, prior.origin)
    indices = list(range(len(frames)))[args.range]
    samples = samples_for_prior(prior)
    jobs = [(i, frames[i], *_resolve_icv(args, frames[i])) for i in indices]

    def work(job):
        i, frame, maneuver, icv = job
        t0 = time.perf_counter()
        try:
            grid, path = _plan_frame(prior, samples, frame, settings, maneuver, icv, None)
            err = None
        except PlanningError as exc:
            res = prior.sampling.resolution if prior.sampling else 1.9
            grid = compute_map(samples, frame, prior.statics, settings.risk, resolution=res)
            path, err = None, exc
        return i, grid, path, err, time.perf_counter() - t0

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]

    failed = 0
    timings = []
    for i, grid, path, err, dt in results:
        _write(args.out / f"grid_{i:04d}.csv", export_grid(grid, "csv"))
        _write(args.out / f"grid_{i:04d}.pgm", export_grid(grid, "pgm", args.scale))
        if err is None:
            _write(args.out / f"path_{i:04d}.json", _path_json(path, grid.timestamp))
            nodes = [n.position for n in path.raw_nodes]
            if args.figures:
                plot_risk_map(grid, args.out / f"overlay_{i:04d}.png", path)
        else:
            failed += 1
            doc = {"status": "error", "code": getattr(err, "code", "PLANNING_ERROR"), "detail": str(err), "grid_t": grid.timestamp}
            _write(args.out / f"path_{i:04d}.json", (json.dumps(doc, indent=1) + "\n").encode("utf-8"))
            nodes = []
        _write(args.out / f"overlay_{i:04d}.ppm", export_overlay(grid, nodes, args.scale))
        timings.append((i, dt))

    print("frame,compute_ms")
    for i, dt in timings:
        print(f"{i},{dt * 1e3:.3f}")
    ms = np.array([dt for _, dt in timings]) * 1e3
    if len(ms):
        print(f"frames={len(ms)} mean_ms={ms.mean():.3f} p95_ms={np.percentile(ms, 95):.3f}")
    return EXIT_PLANNING if failed else EXIT_OK


def cmd_serve(args, settings) -> int:
    _require(args, "map-prior")
    prior = load_map_prior(args.map_prior, settings.risk.weights)
    service = EdgeService(initial_state(prior, settings.risk, settings.planner, settings.service))
    try:
        if args.pipe:
            service.serve_pipe(sys.stdin, sys.stdout)
        else:
            host, _, port = args.listen.rpartition(":")
            try:
                server = make_tcp_server(service, host or "127.0.0.1", int(port))
            except (OSError, ValueError) as exc:
                print(f"riskocc: cannot bind {args.listen}: {exc}", file=sys.stderr)
                return EXIT_IO
            print(f"listening on {server.server_address[0]}:{server.server_address[1]}", file=sys.stderr)
            try:
                server.serve_forever()
            finally:
                server.server_close()
    except KeyboardInterrupt:
        pass
    finally:
        args.out.mkdir(parents=True, exist_ok=True)
        service.write_session_log(args.out / "session.jsonl")
    return EXIT_OK


def cmd_eval(args, settings) -> int:
    braking = settings.braking
    if args.v0 is not None:
        braking = replace(braking, v0=args.v0)
    if args.amax is not None:
        braking = replace(braking, a_max=args.amax)
    BrakingConfig(**{f: getattr(braking, f) for f in ("a_max", "v0", "lookahead_corridor_halfwidth")})
    scenario = load_braking_scenario(args.scenario or data_path("quant_leftturn.jsonl"))
    try:
        study = run_study(scenario, braking, settings.risk, settings.planner)
    except PlanningError as exc:
        print(f"riskocc: {getattr(exc, 'code', 'PLANNING_ERROR')}: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    csv_text, summary = report_csv(study), report_summary(study)
    _write(args.out / "braking_report.csv", csv_text.encode("ascii"))
    _write(args.out / "braking_summary.txt", summary.encode("ascii"))
    plot_braking_study(study, scenario, args.out / "braking_study.png")
    sys.stdout.write(csv_text + "\n" + summary)
    return EXIT_OK


COMMANDS = {"map": cmd_map, "plan": cmd_plan, "replay": cmd_replay, "serve": cmd_serve, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _settings(args)
        return COMMANDS[args.command](args, settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"riskocc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, RasterError) as exc:
        print(f"riskocc: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = exc.filename or ""
        print(f"riskocc: {name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
