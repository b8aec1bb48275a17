"""Command-line entry point: ``tactrack {simulate,track,eval,experiment,speed}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import experiment as exp
from .dataset import DatasetError, as_hypothesis_source, read_poses, read_trajectory, write_pose_track, write_trajectory
from .kinematics import EmptyObservation
from .metrics import LengthMismatch, TrackReport
from .optim import NonFiniteObjective
from .tracker import MODES, MissingInitialHypothesisWindow, TrackerConfig, track

USER_ERRORS = (
    DatasetError,
    exp.ConfigError,
    LengthMismatch,
    MissingInitialHypothesisWindow,
    EmptyObservation,
    NonFiniteObjective,
    ValueError,
)


def _print_json(doc) -> None:
    print(json.dumps(doc, indent=2))


def _load_generate(path) -> dict:
    if path is None:
        return dict(exp.SYNTHETIC_SUITE)
    try:
        with open(path, encoding="utf-8") as fh:
            gen = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise exp.ConfigError(f"cannot load {path}: {exc}") from exc
    exp.validate_config(gen, exp.GENERATE_SCHEMA)
    return gen


def cmd_simulate(args) -> int:
    gen = _load_generate(args.config)
    if args.count is not None:
        gen["count"] = args.count
    if args.seed is not None:
        gen["seed"] = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for data in exp.generate_files(gen):
        path = out / f"{data.header.object_id}.json"
        write_trajectory(path, data)
        print(path)
    return 0


def cmd_track(args) -> int:
    data = read_trajectory(args.trajectory)
    config = TrackerConfig(window_n=args.window_n, lambda_t=args.lambda_t, lambda_r=args.lambda_r, mode=args.mode)
    hyps = as_hypothesis_source(data) if data.has_hypotheses() else None
    t0 = time.perf_counter()
    est = track(data.observations(), hyps, data.initial_pose(), config)
    elapsed = time.perf_counter() - t0
    write_pose_track(args.out, est, [f.t for f in data.frames], data.header.object_id, args.mode)
    report = TrackReport.from_poses(
        est,
        data.ground_truth(),
        timings={"track_s": elapsed, "per_frame_ms": 1000.0 * elapsed / len(est)},
        config={"mode": args.mode, "window_n": args.window_n, "lambda_t": args.lambda_t, "lambda_r": args.lambda_r},
    )
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    _print_json(asdict(report.aggregates))
    return 0


def cmd_eval(args) -> int:
    _, est = read_poses(args.estimates)
    _, gt = read_poses(args.ground_truth)
    report = TrackReport.from_poses(est, gt)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=1) + "\n", encoding="utf-8")
    _print_json(asdict(report.aggregates))
    return 0


def cmd_experiment(args) -> int:
    config = exp.load_config(args.config)
    if args.workers is not None:
        config["workers"] = args.workers
    base = Path(args.config).resolve().parent
    out = Path(args.out) if args.out else base / config["output_dir"]
    result = exp.run_experiment(config, output_dir=out)
    failed = sum(r["status"] != "ok" for r in result.rows)
    print(f"{len(result.rows)} cells ({failed} failed) -> {result.output_dir}")
    for row in result.summary:
        value = "" if row["sweep_value"] is None else f" {row['sweep_parameter']}={row['sweep_value']}"
        if row["mean_rot_deg"] is None:
            print(f"  {row['mode']:16s}{value}: all cells failed")
            continue
        print(
            f"  {row['mode']:16s}{value}: R {row['mean_rot_deg']:.3f} deg  T {row['mean_trans_mm']:.3f} mm"
            f"  5deg5mm {row['pct_5deg5mm']:.1f}%"
        )
    return 0


def cmd_speed(args) -> int:
    if args.trajectory:
        data = read_trajectory(args.trajectory)
    else:
        data = exp.generate_files({**exp.SYNTHETIC_SUITE, "seed": 0, "count": 1})[0]
    report = exp.measure_speed(data, TrackerConfig(window_n=args.window_n), repeats=args.repeats)
    _print_json(asdict(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tactrack", description="Contact-kinematics + visual pose tracking toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate trajectory files")
    s.add_argument("--config", help="JSON generation block (default: synthetic suite)")
    s.add_argument("--count", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("track", help="track one trajectory file")
    s.add_argument("trajectory")
    s.add_argument("--mode", choices=MODES, default="fused")
    s.add_argument("--window-n", type=int, default=5)
    s.add_argument("--lambda-t", type=float, default=0.01)
    s.add_argument("--lambda-r", type=float, default=0.1)
    s.add_argument("--out", required=True, help="pose track output (JSON)")
    s.add_argument("--report", help="optional TrackReport output (JSON)")
    s.set_defaults(func=cmd_track)

    s = sub.add_parser("eval", help="metrics of a pose track against ground truth")
    s.add_argument("estimates", help="pose track file")
    s.add_argument("ground_truth", help="pose track or trajectory file")
    s.add_argument("--out", help="optional TrackReport output (JSON)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("experiment", help="run a batch experiment config")
    s.add_argument("config")
    s.add_argument("--out", help="override output_dir")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("speed", help="per-stage frame rates")
    s.add_argument("trajectory", nargs="?", help="trajectory file (default: one generated clip)")
    s.add_argument("--window-n", type=int, default=5)
    s.add_argument("--repeats", type=int, default=3)
    s.set_defaults(func=cmd_speed)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
