"""Command-line entry points: headless runs, DTW evaluation, live serving.

Exit codes: 0 ok, 2 bad configuration, 3 run aborted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import dtw
from .runner import RunAborted, run_headless
from .scenario import ScenarioError, load_scenario

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_ABORTED = 3

SEED_ENV = "TAR_SIM_SEED"


def _resolve_seed(args) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScenarioError(f"{SEED_ENV} must be an integer, got {env!r}")
    return None


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario, seed_override=_resolve_seed(args))
        if args.redetect is not None:
            raw = dict(scenario.raw)
            raw.setdefault("tracker", {})
            raw["tracker"] = dict(raw["tracker"], redetect_level=args.redetect)
            scenario = load_scenario(raw)
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG

    out_dir = Path(args.out)
    log_path = out_dir / "run.jsonl"
    try:
        log = run_headless(scenario)
    except RunAborted as exc:
        exc.log.save(log_path)
        print(f"run aborted: {exc}", file=sys.stderr)
        print(f"partial log: {log_path}", file=sys.stderr)
        return EXIT_ABORTED
    log.save(log_path)
    summary = log.summary()
    print(json.dumps({"log": str(log_path), **summary}))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        if args.log:
            _, records = dtw.read_run_log(args.log)
            drone, target = dtw.trajectories_from_records(records, args.dims)
            base_dir = Path(args.log).parent
        elif args.drone_csv and args.target_csv:
            drone = dtw.read_trajectory_csv(args.drone_csv)
            target = dtw.read_trajectory_csv(args.target_csv)
            base_dir = Path(args.drone_csv).parent
        else:
            print("error: provide --log or both --drone-csv and --target-csv",
                  file=sys.stderr)
            return EXIT_BAD_CONFIG
        if args.resample_dt:
            drone, target = drone.resample(args.resample_dt), target.resample(args.resample_dt)
        report = dtw.dtw_fast(drone, target, radius=args.radius, case_name=args.case)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    out_dir = Path(args.out) if args.out else base_dir
    files = dtw.write_report(report, drone, target, out_dir, base=args.case or "dtw")
    print(json.dumps({"case": report.case_name, "distance": report.distance,
                      "mean_distance": report.mean_distance,
                      "path_len": len(report.path), **files}))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import ALIAS_PORT, serve

    try:
        scenario = load_scenario(args.scenario, seed_override=_resolve_seed(args))
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    port = ALIAS_PORT if args.port_5555 else args.port
    ui_dir = args.ui
    if ui_dir is None:
        bundled = Path.cwd() / "frontend" / "dist"
        if (bundled / "index.html").exists():
            ui_dir = str(bundled)
    print(f"session: ws://127.0.0.1:{port}/live"
          + (f"  ui: http://127.0.0.1:{port}/" if ui_dir else ""))
    serve(scenario, port=port, speed=args.speed, ui_dir=ui_dir,
          encoding=args.encoding, stream_scale=args.stream_scale)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="followsim",
                                description="closed-loop target-following simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario headless and write the JSONL log")
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--redetect", type=int, choices=(1, 2, 3))
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="DTW-evaluate a run log or a CSV trajectory pair")
    ev.add_argument("--log")
    ev.add_argument("--drone-csv")
    ev.add_argument("--target-csv")
    ev.add_argument("--dims", choices=("xy", "xyz"), default="xy")
    ev.add_argument("--radius", type=int, default=4)
    ev.add_argument("--case", required=True)
    ev.add_argument("--out")
    ev.add_argument("--resample-dt", type=float)
    ev.set_defaults(func=cmd_eval)

    srv = sub.add_parser("serve", help="serve a scenario interactively")
    srv.add_argument("--scenario", required=True)
    srv.add_argument("--port", type=int, default=1234)
    srv.add_argument("--port-5555", action="store_true",
                     help="listen on the legacy port 5555 instead")
    srv.add_argument("--speed", type=float, default=1.0,
                     help="real-time factor; <= 0 runs unpaced")
    srv.add_argument("--seed", type=int)
    srv.add_argument("--ui", help="static UI directory to mount at /")
    srv.add_argument("--encoding", choices=("png", "jpeg"), default="png")
    srv.add_argument("--stream-scale", type=int,
                     help="downscale streamed frames to this width")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
