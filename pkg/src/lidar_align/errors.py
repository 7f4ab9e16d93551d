"""Exception hierarchy. Every pipeline failure names the stage that raised it."""

from __future__ import annotations


class AlignmentError(Exception):
    """Base class for all errors raised by lidar_align."""

    stage = "pipeline"

    def __init__(self, message: str, stage: str | None = None):
        if stage is not None:
            self.stage = stage
        super().__init__(message)

    def __str__(self) -> str:
        return f"[{self.stage}] {super().__str__()}"


class ValidationError(AlignmentError, ValueError):
    stage = "validation"


class SceneError(AlignmentError):
    stage = "simulate"


class ClusterError(AlignmentError):
    stage = "cluster"


class RoiError(AlignmentError):
    stage = "roi"


class PlaneFitError(AlignmentError):
    stage = "ransac"


class FeatureError(AlignmentError):
    stage = "features"


class SolverError(AlignmentError):
    stage = "solver"


class ScanFormatError(AlignmentError, ValueError):
    stage = "io"
