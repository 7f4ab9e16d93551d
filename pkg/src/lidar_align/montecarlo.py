"""Monte Carlo accuracy/precision study over swept or random misalignments.

Every trial draws its own RNG stream from ``(master seed, trial index)`` so a
run is reproducible regardless of worker count. Per pose, the mean of the
estimation error is the accuracy and its standard deviation the precision;
the overall figures average those per-pose values.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lidar_align.config import MODES, RunConfig
from lidar_align.errors import AlignmentError, ValidationError
from lidar_align.estimator import estimate_alignment
from lidar_align.geometry import POSE_FIELDS, PoseVector
from lidar_align.simulator import generate_scan

# reporting units per pose component
_SCALE = {"tilt": 180.0 / math.pi, "yaw": 180.0 / math.pi, "roll": 180.0 / math.pi,
          "dx": 1000.0, "dy": 1000.0, "dz": 1000.0}
_UNIT = {"tilt": "deg", "yaw": "deg", "roll": "deg", "dx": "mm", "dy": "mm", "dz": "mm"}
TABLE_COLUMNS = ("tilt", "roll", "yaw", "dx")
_POSE_STREAM = 0x5053


def _nanmean(values: np.ndarray) -> np.ndarray:
    # all-failed columns stay nan without a warning
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.nanmean(values, axis=0)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    pose_index: int
    scan_seed: int
    truth: PoseVector
    estimate: PoseVector | None
    latency_ms: float
    converged: bool
    iterations: int
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.estimate is not None

    @property
    def error(self) -> np.ndarray | None:
        if self.estimate is None:
            return None
        return self.estimate.as_array() - self.truth.as_array()


@dataclass(frozen=True)
class MonteCarloResult:
    mode: str
    seed: int
    poses: list[PoseVector]
    trials: list[TrialRecord]
    pose_mean: np.ndarray
    pose_std: np.ndarray
    pose_count: np.ndarray

    @property
    def accuracy(self) -> np.ndarray:
        """Average over poses of the per-pose mean error (SI, pose order)."""
        return _nanmean(self.pose_mean)

    @property
    def precision(self) -> np.ndarray:
        """Average over poses of the per-pose error standard deviation."""
        return _nanmean(self.pose_std)

    @property
    def failure_rate(self) -> float:
        return sum(not t.ok for t in self.trials) / max(len(self.trials), 1)

    def in_units(self, values: np.ndarray) -> dict[str, float]:
        return {f: float(values[i] * _SCALE[f]) for i, f in enumerate(POSE_FIELDS)}


def sweep_poses(cfg: RunConfig, mode: str) -> list[PoseVector]:
    w = cfg.sweep
    if mode == "yaw-sweep":
        n = int(round((w.yaw_stop - w.yaw_start) / w.yaw_step))
        return [PoseVector(yaw=w.yaw_start + k * w.yaw_step) for k in range(n + 1)]
    if mode == "x-sweep":
        n = int(round((w.x_stop - w.x_start) / w.x_step))
        return [PoseVector(dx=w.x_start + k * w.x_step) for k in range(n + 1)]
    if mode == "random":
        rng = np.random.default_rng(np.random.SeedSequence([w.seed, _POSE_STREAM]))
        lim, dlim = w.random_angle_limit, w.random_dx_limit
        return [
            PoseVector(*rng.uniform(-lim, lim, 3), dx=float(rng.uniform(-dlim, dlim)))
            for _ in range(w.random_poses)
        ]
    raise ValidationError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")


def trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, trial]).generate_state(1, dtype=np.uint32)[0])


def run_trial(cfg: RunConfig, truth: PoseVector, trial: int, pose_index: int) -> TrialRecord:
    seed = trial_seed(cfg.sweep.seed, trial)
    try:
        scan = generate_scan(cfg.sensor, cfg.scene, truth, seed,
                             max_angle=cfg.sweep.max_angle, max_shift=cfg.sweep.max_shift)
        report = estimate_alignment(scan, cfg.pipeline(ransac_seed=seed))
    except AlignmentError as exc:
        return TrialRecord(trial, pose_index, seed, truth, None, float("nan"), False, 0, str(exc))
    return TrialRecord(trial, pose_index, seed, truth, report.pose, report.latency_ms,
                       report.converged, report.iterations)


def _run_chunk(args) -> list[TrialRecord]:
    cfg, jobs = args
    return [run_trial(cfg, truth, trial, pose) for truth, trial, pose in jobs]


def summarize(mode: str, seed: int, poses: list[PoseVector],
              trials: list[TrialRecord]) -> MonteCarloResult:
    n = len(poses)
    mean = np.full((n, 6), np.nan)
    std = np.full((n, 6), np.nan)
    count = np.zeros(n, dtype=int)
    for p in range(n):
        errors = [t.error for t in trials if t.pose_index == p and t.ok]
        count[p] = len(errors)
        if errors:
            e = np.array(errors)
            mean[p] = e.mean(axis=0)
            std[p] = e.std(axis=0, ddof=1) if len(e) > 1 else 0.0
    return MonteCarloResult(mode, seed, poses, trials, mean, std, count)


def run_montecarlo(cfg: RunConfig, mode: str, workers: int = 1,
                   progress=None) -> MonteCarloResult:
    """Run ``scans_per_pose`` simulated scans at each pose of ``mode``."""
    poses = sweep_poses(cfg, mode)
    per = cfg.sweep.scans_per_pose
    jobs = [(truth, p * per + j, p) for p, truth in enumerate(poses) for j in range(per)]
    if workers <= 1:
        trials = []
        for k, (truth, trial, p) in enumerate(jobs):
            trials.append(run_trial(cfg, truth, trial, p))
            if progress is not None:
                progress(k + 1, len(jobs))
    else:
        chunks = [jobs[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = [t for chunk in pool.map(_run_chunk, [(cfg, c) for c in chunks]) for t in chunk]
        trials.sort(key=lambda t: t.trial)
    return summarize(mode, cfg.sweep.seed, poses, trials)


def _f(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.6f}"


def write_summary_csv(result: MonteCarloResult, path) -> None:
    acc, prec = result.in_units(result.accuracy), result.in_units(result.precision)
    failed = sum(not t.ok for t in result.trials)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("#lidar-align-summary v1\n")
        fh.write(f"#mode={result.mode} seed={result.seed} poses={len(result.poses)} "
                 f"trials={len(result.trials)} failures={failed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimation"] + [f"{c}_{_UNIT[c]}" for c in TABLE_COLUMNS])
        w.writerow(["accuracy"] + [_f(acc[c]) for c in TABLE_COLUMNS])
        w.writerow(["precision"] + [_f(prec[c]) for c in TABLE_COLUMNS])


def write_plot_csv(result: MonteCarloResult, path) -> None:
    header = ["pose", "n_ok"]
    header += [f"truth_{f}_{_UNIT[f]}" for f in POSE_FIELDS]
    for f in POSE_FIELDS:
        header += [f"mean_err_{f}_{_UNIT[f]}", f"std_{f}_{_UNIT[f]}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("#lidar-align-plot v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for p, truth in enumerate(result.poses):
            row = [p, int(result.pose_count[p])]
            row += [_f(truth.as_array()[i] * _SCALE[f]) for i, f in enumerate(POSE_FIELDS)]
            for i, f in enumerate(POSE_FIELDS):
                row += [_f(result.pose_mean[p, i] * _SCALE[f]), _f(result.pose_std[p, i] * _SCALE[f])]
            w.writerow(row)


def write_trials_csv(result: MonteCarloResult, path) -> None:
    header = ["trial", "pose", "scan_seed"]
    for prefix in ("truth", "est", "err"):
        header += [f"{prefix}_{f}_{_UNIT[f]}" for f in POSE_FIELDS]
    header += ["latency_ms", "converged", "iterations", "failure"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("#lidar-align-trials v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t in result.trials:
            row = [t.trial, t.pose_index, t.scan_seed]
            row += [repr(float(t.truth.as_array()[i] * _SCALE[f])) for i, f in enumerate(POSE_FIELDS)]
            if t.ok:
                est, err = t.estimate.as_array(), t.error
                row += [repr(float(est[i] * _SCALE[f])) for i, f in enumerate(POSE_FIELDS)]
                row += [repr(float(err[i] * _SCALE[f])) for i, f in enumerate(POSE_FIELDS)]
            else:
                row += ["nan"] * 12
            row += [f"{t.latency_ms:.3f}", int(t.converged), t.iterations, t.failure]
            w.writerow(row)


def write_outputs(result: MonteCarloResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "summary": out / f"summary_{result.mode}.csv",
        "plot": out / f"plot_{result.mode}.csv",
        "trials": out / f"trials_{result.mode}.csv",
    }
    write_summary_csv(result, paths["summary"])
    write_plot_csv(result, paths["plot"])
    write_trials_csv(result, paths["trials"])
    return paths


def format_table(result: MonteCarloResult) -> str:
    acc, prec = result.in_units(result.accuracy), result.in_units(result.precision)
    head = f"{'':<10}" + "".join(f"{c + ' (' + _UNIT[c] + ')':>14}" for c in TABLE_COLUMNS)
    lines = [
        f"mode={result.mode} poses={len(result.poses)} trials={len(result.trials)} "
        f"failure_rate={result.failure_rate:.3f}",
        head,
        f"{'accuracy':<10}" + "".join(f"{acc[c]:>14.4f}" for c in TABLE_COLUMNS),
        f"{'precision':<10}" + "".join(f"{prec[c]:>14.4f}" for c in TABLE_COLUMNS),
    ]
    return "\n".join(lines)

