"""Command-line entry point: ``lidar-align {simulate,estimate,montecarlo,bench}``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from lidar_align.config import MODES, RunConfig, load_config
from lidar_align.errors import AlignmentError, ValidationError
from lidar_align.estimator import EstimateReport, estimate_alignment
from lidar_align.features import CORNER_NAMES
from lidar_align.geometry import PoseVector
from lidar_align.montecarlo import format_table, run_montecarlo, trial_seed, write_outputs
from lidar_align.scan_io import load_scan, save_scan
from lidar_align.simulator import generate_scan

EXIT_OK, EXIT_PIPELINE, EXIT_USAGE = 0, 1, 2
LATENCY_BUDGET_MS = 60.0


class UsageError(Exception):
    pass


def _load(args) -> RunConfig:
    cfg = RunConfig()
    if args.config is not None:
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        except ValidationError as exc:
            raise UsageError(f"bad config: {exc}") from exc
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        cfg = replace(cfg, sweep=replace(cfg.sweep, seed=args.seed))
    return cfg


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    truth = PoseVector.from_degrees_mm(args.tilt_deg, args.yaw_deg, args.roll_deg,
                                       args.dx_mm, args.dy_mm, args.dz_mm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.scans):
        seed = trial_seed(cfg.sweep.seed, k)
        scan = generate_scan(cfg.sensor, cfg.scene, truth, seed,
                             max_angle=cfg.sweep.max_angle, max_shift=cfg.sweep.max_shift)
        path = out / f"scan_{k:04d}.csv"
        save_scan(scan, path)
        print(f"wrote {path} ({len(scan)} beams, seed {seed})")
    return EXIT_OK


_REPORT_FIELDS = ["scan", "converged", "iterations", "cost",
                  "tilt_deg", "yaw_deg", "roll_deg", "dx_mm", "dy_mm", "dz_mm"]
_REPORT_FIELDS += [f"residual_{c}_mm" for c in CORNER_NAMES]
_REPORT_FIELDS += ["roi_points", "latency_ms"]


def _report_row(name: str, report: EstimateReport) -> list:
    pose = report.pose.to_degrees_mm()
    row = [name, int(report.converged), report.iterations, f"{report.cost:.9g}"]
    row += [f"{pose[k]:.6f}" for k in ("tilt_deg", "yaw_deg", "roll_deg", "dx_mm", "dy_mm", "dz_mm")]
    row += [f"{r * 1000.0:.4f}" for r in report.corner_residuals]
    row += [report.roi_size, f"{report.latency_ms:.3f}"]
    return row


def _describe(name: str, report: EstimateReport, truth: PoseVector | None) -> str:
    pose = report.pose.to_degrees_mm()
    lines = [
        f"scan       {name}",
        f"converged  {report.converged} after {report.iterations} iterations "
        f"(cost {report.cost:.3e} m^2, {report.latency_ms:.1f} ms, {report.roi_size} ROI points)",
        f"tilt  {pose['tilt_deg']:+9.4f} deg   yaw {pose['yaw_deg']:+9.4f} deg   "
        f"roll {pose['roll_deg']:+9.4f} deg",
        f"dx    {pose['dx_mm']:+9.3f} mm    dy  {pose['dy_mm']:+9.3f} mm    "
        f"dz   {pose['dz_mm']:+9.3f} mm",
    ]
    if truth is not None:
        err = PoseVector.from_array(report.pose.as_array() - truth.as_array()).to_degrees_mm()
        lines.append("error vs truth: " + ", ".join(f"{k} {v:+.4f}" for k, v in err.items()))
    return "\n".join(lines)


def _cmd_estimate(args) -> int:
    cfg = _load(args)
    rows = []
    for k, path in enumerate(args.scans):
        scan = load_scan(path, cfg.sensor)
        report = estimate_alignment(scan, cfg.pipeline(ransac_seed=cfg.sweep.seed))
        if k:
            print()
        print(_describe(str(path), report, scan.truth))
        rows.append(_report_row(str(path), report))
    out = Path(args.out) if args.out else Path(args.scans[0]).parent
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.csv"
    with open(report_path, "w", newline="", encoding="utf-8") as fh:
        fh.write("#lidar-align-report v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_REPORT_FIELDS)
        w.writerows(rows)
    if len(rows) > 1:
        poses = np.array([[float(v) for v in r[4:10]] for r in rows])
        print("\nover", len(rows), "scans: mean",
              np.array2string(poses.mean(axis=0), precision=4),
              "std", np.array2string(poses.std(axis=0, ddof=1), precision=4),
              "(tilt, yaw, roll deg; dx, dy, dz mm)")
    print(f"\nreport written to {report_path}")
    return EXIT_OK


def _cmd_montecarlo(args) -> int:
    cfg = _load(args)
    sweep = cfg.sweep
    if args.scans is not None:
        sweep = replace(sweep, scans_per_pose=args.scans)
    if args.poses is not None:
        sweep = replace(sweep, random_poses=args.poses)
    cfg = replace(cfg, sweep=sweep)

    def progress(done: int, total: int) -> None:
        if done % 50 == 0 or done == total:
            print(f"\r{done}/{total} trials", end="", file=sys.stderr, flush=True)

    result = run_montecarlo(cfg, args.mode, workers=args.workers,
                            progress=None if args.quiet else progress)
    if not args.quiet:
        print(file=sys.stderr)
    print(format_table(result))
    for name, path in write_outputs(result, args.out).items():
        print(f"{name:<8} {path}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _load(args)
    truth = PoseVector()
    latencies = []
    for k in range(args.scans):
        seed = trial_seed(cfg.sweep.seed, k)
        scan = generate_scan(cfg.sensor, cfg.scene, truth, seed)
        latencies.append(estimate_alignment(scan, cfg.pipeline(ransac_seed=seed)).latency_ms)
    lat = np.array(latencies)
    median = float(np.median(lat))
    print(f"points per scan ~{len(scan)}, {args.scans} scans")
    print("latency ms: " + "  ".join(
        f"{name} {value:.2f}" for name, value in (
            ("min", lat.min()), ("p10", np.percentile(lat, 10)), ("median", median),
            ("mean", lat.mean()), ("p90", np.percentile(lat, 90)),
            ("p99", np.percentile(lat, 99)), ("max", lat.max()),
        )
    ))
    verdict = "PASS" if median <= LATENCY_BUDGET_MS else "FAIL"
    print(f"median {median:.2f} ms vs {LATENCY_BUDGET_MS:.0f} ms budget: {verdict}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidar-align",
        description="Estimate LiDAR mounting misalignment from a single target board.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", type=Path, help="JSON run configuration")
        if seed:
            p.add_argument("--seed", type=int, help="master seed (overrides sweep.seed)")

    p = sub.add_parser("simulate", help="write simulated scan CSV files")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scans", type=_positive, default=1)
    for name in ("tilt-deg", "yaw-deg", "roll-deg", "dx-mm", "dy-mm", "dz-mm"):
        p.add_argument(f"--{name}", type=float, default=0.0, help="true misalignment")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="estimate misalignment from scan CSV files")
    common(p)
    p.add_argument("scans", nargs="+", help="scan CSV file(s)")
    p.add_argument("--out", help="directory for report.csv (default: next to the first scan)")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("montecarlo", help="Monte Carlo accuracy/precision study")
    common(p)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scans", type=_positive, help="scans per pose")
    p.add_argument("--poses", type=_positive, help="number of random poses")
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("bench", help="pipeline latency distribution")
    common(p)
    p.add_argument("--scans", type=_positive, default=100)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lidar-align: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AlignmentError as exc:
        print(f"lidar-align: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"lidar-align: {args.command} failed: [io] {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
