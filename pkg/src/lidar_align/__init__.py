"""Estimate LiDAR mounting misalignment from a single rectangular target board."""

from lidar_align.config import RunConfig, SweepConfig, load_config, save_config
from lidar_align.errors import (
    AlignmentError,
    ClusterError,
    FeatureError,
    PlaneFitError,
    RoiError,
    ScanFormatError,
    SceneError,
    SolverError,
    ValidationError,
)
from lidar_align.estimator import (
    EstimateReport,
    PipelineConfig,
    SolverConfig,
    estimate_alignment,
    lm_solve,
)
from lidar_align.features import CornerFeatures, extract_corner_features
from lidar_align.geometry import (
    PoseVector,
    RigidTransform,
    SphericalBeam,
    TargetSpec,
    rotation_matrix,
    spherical_to_cartesian,
)
from lidar_align.montecarlo import MonteCarloResult, run_montecarlo
from lidar_align.preprocess import (
    PlaneModel,
    PreprocessConfig,
    RansacConfig,
    RoiCriteria,
    euclidean_cluster,
    project_to_plane,
    ransac_plane_fit,
    select_roi,
)
from lidar_align.scan_io import load_scan, save_scan
from lidar_align.simulator import Scan, Scene, SensorModel, generate_scan

__all__ = [
    "AlignmentError", "ClusterError", "CornerFeatures", "EstimateReport", "FeatureError",
    "MonteCarloResult", "PipelineConfig", "PlaneFitError", "PlaneModel", "PoseVector",
    "PreprocessConfig", "RansacConfig", "RigidTransform", "RoiCriteria", "RoiError",
    "RunConfig", "Scan", "ScanFormatError", "Scene", "SceneError", "SensorModel",
    "SolverConfig", "SolverError", "SphericalBeam", "SweepConfig", "TargetSpec",
    "ValidationError", "estimate_alignment", "euclidean_cluster", "extract_corner_features",
    "generate_scan", "lm_solve", "load_config", "load_scan", "project_to_plane",
    "ransac_plane_fit", "rotation_matrix", "run_montecarlo", "save_config", "save_scan",
    "select_roi", "spherical_to_cartesian",
]
