"""Run configuration and its JSON representation.

The JSON document has the sections ``sensor``, ``target``, ``scene``,
``preprocess``, ``solver`` and ``sweep``. Keys carry their unit as a suffix
(``_deg``, ``_mm``, ``_m``); everything is converted to SI on load. Any key
may be omitted to keep its default; unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from lidar_align.errors import ValidationError
from lidar_align.estimator import PipelineConfig, SolverConfig
from lidar_align.geometry import DEFAULT_MAX_ANGLE, DEFAULT_MAX_SHIFT, TargetSpec
from lidar_align.preprocess import PreprocessConfig, RansacConfig, RoiCriteria
from lidar_align.simulator import Scene, SensorModel, default_clutter

CONFIG_FORMAT = "lidar-align-config v1"
MODES = ("yaw-sweep", "x-sweep", "random")


@dataclass(frozen=True)
class SweepConfig:
    yaw_start: float = math.radians(-3.0)
    yaw_stop: float = math.radians(3.0)
    yaw_step: float = math.radians(0.5)
    x_start: float = -0.030
    x_stop: float = 0.030
    x_step: float = 0.005
    random_poses: int = 100
    random_angle_limit: float = math.radians(3.0)
    random_dx_limit: float = 0.030
    scans_per_pose: int = 50
    seed: int = 0
    max_angle: float = DEFAULT_MAX_ANGLE
    max_shift: float = DEFAULT_MAX_SHIFT

    def __post_init__(self) -> None:
        if not (self.yaw_step > 0 and self.x_step > 0):
            raise ValidationError("sweep step must be positive")
        if self.yaw_stop < self.yaw_start or self.x_stop < self.x_start:
            raise ValidationError("sweep stop must not precede start")
        if self.random_poses < 1 or self.scans_per_pose < 1:
            raise ValidationError("random_poses and scans_per_pose must be >= 1")
        if self.random_angle_limit < 0 or self.random_dx_limit < 0:
            raise ValidationError("random limits must be >= 0")
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")


@dataclass(frozen=True)
class RunConfig:
    sensor: SensorModel = field(default_factory=SensorModel)
    scene: Scene = field(default_factory=Scene)
    preprocess: PreprocessConfig = PreprocessConfig()
    solver: SolverConfig = SolverConfig()
    sweep: SweepConfig = SweepConfig()

    @property
    def target(self) -> TargetSpec:
        return self.scene.target

    def pipeline(self, ransac_seed: int = 0) -> PipelineConfig:
        return PipelineConfig(
            target=self.scene.target,
            placement=self.scene.placement,
            preprocess=self.preprocess,
            solver=self.solver,
            ransac_seed=ransac_seed,
        )


def _take(section: dict, name: str, allowed: set[str]) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    return section


def _deg(values):
    return [math.radians(v) for v in values]


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    doc = dict(doc)
    fmt = doc.pop("format", CONFIG_FORMAT)
    if fmt != CONFIG_FORMAT:
        raise ValidationError(f"unsupported config format '{fmt}', expected '{CONFIG_FORMAT}'")
    _take(doc, "config", {"sensor", "target", "scene", "preprocess", "solver", "sweep"})
    try:
        return _build(doc)
    except TypeError as exc:
        raise ValidationError(f"bad config value: {exc}") from exc


def _build(doc: dict) -> RunConfig:
    s = _take(doc.get("sensor", {}), "sensor", {
        "vertical_angles_deg", "azimuth_step_deg", "range_noise_sigma_m", "range_offset_m",
        "azimuth_jitter_deg", "max_range_m",
    })
    base = SensorModel()
    sensor = SensorModel(
        vertical_angles=tuple(_deg(s["vertical_angles_deg"])) if "vertical_angles_deg" in s
        else base.vertical_angles,
        azimuth_step=math.radians(s.get("azimuth_step_deg", math.degrees(base.azimuth_step))),
        range_noise_sigma=float(s.get("range_noise_sigma_m", base.range_noise_sigma)),
        range_offset=float(s.get("range_offset_m", base.range_offset)),
        azimuth_jitter=math.radians(s.get("azimuth_jitter_deg", math.degrees(base.azimuth_jitter))),
        max_range=float(s.get("max_range_m", base.max_range)),
    )

    t = _take(doc.get("target", {}), "target", {"width_m", "height_m"})
    target = TargetSpec(float(t.get("width_m", 0.9)), float(t.get("height_m", 0.54)))

    sc = _take(doc.get("scene", {}), "scene", {
        "board_center_m", "clutter", "ground_height_m", "wall_distance_m",
    })
    placement = tuple(float(v) for v in sc.get("board_center_m", (0.7, 2.5, 0.0)))
    if len(placement) != 3:
        raise ValidationError("scene.board_center_m needs three values")
    clutter = ()
    if sc.get("clutter", True):
        clutter = default_clutter(float(sc.get("ground_height_m", 0.5)),
                                  float(sc.get("wall_distance_m", 3.5)))
    scene = Scene(target=target, placement=placement, clutter=clutter)

    p = _take(doc.get("preprocess", {}), "preprocess", {
        "cluster_tolerance_m", "roi_range_min_m", "roi_range_max_m", "roi_min_count",
        "roi_min_reflectivity", "ransac_threshold_m", "ransac_iterations",
        "ransac_min_inlier_ratio", "ransac_refit_rounds", "ransac_refit_sigmas",
    })
    roi0, ran0 = RoiCriteria(), RansacConfig()
    preprocess = PreprocessConfig(
        cluster_tolerance=float(p.get("cluster_tolerance_m", 0.1)),
        roi=RoiCriteria(
            range_min=float(p.get("roi_range_min_m", roi0.range_min)),
            range_max=float(p.get("roi_range_max_m", roi0.range_max)),
            min_count=int(p.get("roi_min_count", roi0.min_count)),
            min_reflectivity=float(p.get("roi_min_reflectivity", roi0.min_reflectivity)),
        ),
        ransac=RansacConfig(
            distance_threshold=float(p.get("ransac_threshold_m", ran0.distance_threshold)),
            max_iterations=int(p.get("ransac_iterations", ran0.max_iterations)),
            min_inlier_ratio=float(p.get("ransac_min_inlier_ratio", ran0.min_inlier_ratio)),
            refit_rounds=int(p.get("ransac_refit_rounds", ran0.refit_rounds)),
            refit_sigmas=float(p.get("ransac_refit_sigmas", ran0.refit_sigmas)),
        ),
    )
    if preprocess.cluster_tolerance <= 0:
        raise ValidationError("preprocess.cluster_tolerance_m must be positive")

    v = _take(doc.get("solver", {}), "solver", {
        "eta", "lambda0", "max_iterations", "step_tolerance", "cost_tolerance", "initial_deg_mm",
    })
    sv0 = SolverConfig()
    initial = sv0.initial
    if "initial_deg_mm" in v:
        vals = [float(x) for x in v["initial_deg_mm"]]
        if len(vals) != 6:
            raise ValidationError("solver.initial_deg_mm needs six values")
        initial = tuple(_deg(vals[:3]) + [x / 1000.0 for x in vals[3:]])
    solver = SolverConfig(
        eta=float(v.get("eta", sv0.eta)),
        lambda0=float(v.get("lambda0", sv0.lambda0)),
        max_iterations=int(v.get("max_iterations", sv0.max_iterations)),
        step_tolerance=float(v.get("step_tolerance", sv0.step_tolerance)),
        cost_tolerance=float(v.get("cost_tolerance", sv0.cost_tolerance)),
        initial=initial,
    )

    w = _take(doc.get("sweep", {}), "sweep", {
        "yaw_start_deg", "yaw_stop_deg", "yaw_step_deg", "x_start_mm", "x_stop_mm", "x_step_mm",
        "random_poses", "random_angle_limit_deg", "random_dx_limit_mm", "scans_per_pose",
        "seed", "max_angle_deg", "max_shift_mm",
    })
    d = SweepConfig()
    sweep = SweepConfig(
        yaw_start=math.radians(w.get("yaw_start_deg", math.degrees(d.yaw_start))),
        yaw_stop=math.radians(w.get("yaw_stop_deg", math.degrees(d.yaw_stop))),
        yaw_step=math.radians(w.get("yaw_step_deg", math.degrees(d.yaw_step))),
        x_start=w.get("x_start_mm", d.x_start * 1000.0) / 1000.0,
        x_stop=w.get("x_stop_mm", d.x_stop * 1000.0) / 1000.0,
        x_step=w.get("x_step_mm", d.x_step * 1000.0) / 1000.0,
        random_poses=int(w.get("random_poses", d.random_poses)),
        random_angle_limit=math.radians(
            w.get("random_angle_limit_deg", math.degrees(d.random_angle_limit))),
        random_dx_limit=w.get("random_dx_limit_mm", d.random_dx_limit * 1000.0) / 1000.0,
        scans_per_pose=int(w.get("scans_per_pose", d.scans_per_pose)),
        seed=int(w.get("seed", d.seed)),
        max_angle=math.radians(w.get("max_angle_deg", math.degrees(d.max_angle))),
        max_shift=w.get("max_shift_mm", d.max_shift * 1000.0) / 1000.0,
    )
    return RunConfig(sensor=sensor, scene=scene, preprocess=preprocess, solver=solver,
                     sweep=sweep)


def config_to_dict(cfg: RunConfig) -> dict:
    s, sc, p, v, w = cfg.sensor, cfg.scene, cfg.preprocess, cfg.solver, cfg.sweep
    initial = list(v.initial)
    return {
        "format": CONFIG_FORMAT,
        "sensor": {
            "vertical_angles_deg": [math.degrees(a) for a in s.vertical_angles],
            "azimuth_step_deg": math.degrees(s.azimuth_step),
            "range_noise_sigma_m": s.range_noise_sigma,
            "range_offset_m": s.range_offset,
            "azimuth_jitter_deg": math.degrees(s.azimuth_jitter),
            "max_range_m": s.max_range,
        },
        "target": {"width_m": sc.target.width, "height_m": sc.target.height},
        "scene": {
            "board_center_m": list(sc.placement),
            "clutter": bool(sc.clutter),
            "ground_height_m": -sc.clutter[0].center[2] if sc.clutter else 0.5,
            "wall_distance_m": sc.clutter[1].center[1] if len(sc.clutter) > 1 else 3.5,
        },
        "preprocess": {
            "cluster_tolerance_m": p.cluster_tolerance,
            "roi_range_min_m": p.roi.range_min,
            "roi_range_max_m": p.roi.range_max,
            "roi_min_count": p.roi.min_count,
            "roi_min_reflectivity": p.roi.min_reflectivity,
            "ransac_threshold_m": p.ransac.distance_threshold,
            "ransac_iterations": p.ransac.max_iterations,
            "ransac_min_inlier_ratio": p.ransac.min_inlier_ratio,
            "ransac_refit_rounds": p.ransac.refit_rounds,
            "ransac_refit_sigmas": p.ransac.refit_sigmas,
        },
        "solver": {
            "eta": v.eta,
            "lambda0": v.lambda0,
            "max_iterations": v.max_iterations,
            "step_tolerance": v.step_tolerance,
            "cost_tolerance": v.cost_tolerance,
            "initial_deg_mm": [math.degrees(a) for a in initial[:3]]
                              + [x * 1000.0 for x in initial[3:]],
        },
        "sweep": {
            "yaw_start_deg": math.degrees(w.yaw_start),
            "yaw_stop_deg": math.degrees(w.yaw_stop),
            "yaw_step_deg": math.degrees(w.yaw_step),
            "x_start_mm": w.x_start * 1000.0,
            "x_stop_mm": w.x_stop * 1000.0,
            "x_step_mm": w.x_step * 1000.0,
            "random_poses": w.random_poses,
            "random_angle_limit_deg": math.degrees(w.random_angle_limit),
            "random_dx_limit_mm": w.random_dx_limit * 1000.0,
            "scans_per_pose": w.scans_per_pose,
            "seed": w.seed,
            "max_angle_deg": math.degrees(w.max_angle),
            "max_shift_mm": w.max_shift * 1000.0,
        },
    }


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(doc)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")
