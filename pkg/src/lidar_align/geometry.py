"""Frames, angle conventions and rigid transforms shared by every stage.

Frames
------
L : LiDAR optical center. X horizontal (right), Y distance (forward), Z up.
O : target board center. Board lies in the plane y = 0, X to the right,
    Z up, sensor on the negative Y side.

A transform ``M = (R, T)`` maps L coordinates into O: ``p_O = R @ p_L + T``,
so ``T`` is the sensor origin expressed in O.

Rotation convention: ``R = Rz(yaw) @ Rx(tilt) @ Ry(roll)``. Yaw turns about
the vertical axis, tilt pitches the pointing (Y) axis up/down, roll turns
about the pointing axis.

All quantities are SI (meters, radians). Degrees and millimeters appear only
at file and CLI boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lidar_align.errors import ValidationError

POSE_FIELDS = ("tilt", "yaw", "roll", "dx", "dy", "dz")

DEFAULT_MAX_ANGLE = math.radians(15.0)
DEFAULT_MAX_SHIFT = 0.2


@dataclass(frozen=True)
class SphericalBeam:
    """One laser return. ``azimuth`` is clockwise-positive from +Y."""

    ring: int
    azimuth: float
    vertical: float
    range: float
    reflectivity: float = 1.0

    def __post_init__(self) -> None:
        values = (self.azimuth, self.vertical, self.range, self.reflectivity)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"non-finite beam field in {self!r}")
        if self.range <= 0.0:
            raise ValidationError(f"beam range must be positive, got {self.range}")
        if not 0.0 <= self.azimuth < 2.0 * math.pi:
            raise ValidationError(f"azimuth {self.azimuth} outside [0, 2pi)")
        if abs(self.vertical) > math.pi / 2:
            raise ValidationError(f"vertical angle {self.vertical} outside [-pi/2, pi/2]")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise ValidationError(f"reflectivity {self.reflectivity} outside [0, 1]")
        if self.ring < 0:
            raise ValidationError(f"ring index must be >= 0, got {self.ring}")


@dataclass(frozen=True)
class PoseVector:
    """The six alignment unknowns: three angles (rad) and three shifts (m)."""

    tilt: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0

    def __post_init__(self) -> None:
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"non-finite pose component in {self!r}")
        for name in ("tilt", "yaw", "roll"):
            angle = getattr(self, name)
            if not -math.pi < angle <= math.pi:
                raise ValidationError(f"{name}={angle} outside (-pi, pi]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in POSE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values) -> PoseVector:
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape != (6,):
            raise ValidationError(f"pose needs 6 components, got {values.shape}")
        return cls(*(float(v) for v in values))

    @classmethod
    def from_degrees_mm(cls, tilt=0.0, yaw=0.0, roll=0.0, dx=0.0, dy=0.0, dz=0.0) -> PoseVector:
        return cls(
            math.radians(tilt), math.radians(yaw), math.radians(roll),
            dx / 1000.0, dy / 1000.0, dz / 1000.0,
        )

    def to_degrees_mm(self) -> dict[str, float]:
        return {
            "tilt_deg": math.degrees(self.tilt),
            "yaw_deg": math.degrees(self.yaw),
            "roll_deg": math.degrees(self.roll),
            "dx_mm": self.dx * 1000.0,
            "dy_mm": self.dy * 1000.0,
            "dz_mm": self.dz * 1000.0,
        }

    def check_envelope(self, max_angle: float = DEFAULT_MAX_ANGLE,
                       max_shift: float = DEFAULT_MAX_SHIFT) -> None:
        """Raise ValidationError if the pose leaves the operating envelope."""
        for name in ("tilt", "yaw", "roll"):
            if abs(getattr(self, name)) > max_angle:
                raise ValidationError(
                    f"{name}={math.degrees(getattr(self, name)):.3f} deg exceeds "
                    f"envelope {math.degrees(max_angle):.3f} deg"
                )
        for name in ("dx", "dy", "dz"):
            if abs(getattr(self, name)) > max_shift:
                raise ValidationError(
                    f"{name}={getattr(self, name):.4f} m exceeds envelope {max_shift} m"
                )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    R: np.ndarray
    T: np.ndarray

    def __post_init__(self) -> None:
        R = np.array(self.R, dtype=float)
        T = np.array(self.T, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValidationError(f"rotation must be 3x3, got {R.shape}")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(T))):
            raise ValidationError("non-finite transform")
        if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValidationError("R is not a proper rotation")
        R.setflags(write=False)
        T.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_pose(cls, pose: PoseVector) -> RigidTransform:
        return cls(rotation_from_angles(pose), [pose.dx, pose.dy, pose.dz])

    def inverse(self) -> RigidTransform:
        return RigidTransform(self.R.T, -self.R.T @ self.T)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self @ other``: apply ``other`` first."""
        return RigidTransform(self.R @ other.R, self.R @ other.T + self.T)

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.T
        return M

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.R, other.R) and np.array_equal(self.T, other.T)


@dataclass(frozen=True)
class TargetSpec:
    width: float = 0.9
    height: float = 0.54

    def __post_init__(self) -> None:
        if not (math.isfinite(self.width) and math.isfinite(self.height)):
            raise ValidationError("target dimensions must be finite")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError(
                f"target dimensions must be positive, got {self.width} x {self.height}"
            )


def spherical_to_cartesian(beam: SphericalBeam) -> np.ndarray:
    """Convert one return to a point in frame L."""
    return spherical_to_cartesian_array(beam.range, beam.azimuth, beam.vertical)


def spherical_to_cartesian_array(r, azimuth, vertical) -> np.ndarray:
    """Vectorised conversion; returns shape (..., 3)."""
    r = np.asarray(r, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    vertical = np.asarray(vertical, dtype=float)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(azimuth))
            and np.all(np.isfinite(vertical))):
        raise ValidationError("non-finite spherical coordinates")
    horizontal = r * np.cos(vertical)
    return np.stack(
        [horizontal * np.sin(azimuth), horizontal * np.cos(azimuth), r * np.sin(vertical)],
        axis=-1,
    )


def cartesian_to_spherical(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`spherical_to_cartesian_array`: (range, azimuth, vertical)."""
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    azimuth = np.mod(np.arctan2(p[..., 0], p[..., 1]), 2.0 * np.pi)
    vertical = np.arcsin(np.clip(p[..., 2] / r, -1.0, 1.0))
    return r, azimuth, vertical


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def rotation_matrix(tilt: float, yaw: float, roll: float) -> np.ndarray:
    return _rz(yaw) @ _rx(tilt) @ _ry(roll)


def rotation_from_angles(pose: PoseVector) -> np.ndarray:
    """Rotation part of ``pose`` as a 3x3 matrix (Rz(yaw) Rx(tilt) Ry(roll))."""
    return rotation_matrix(pose.tilt, pose.yaw, pose.roll)


def rotation_partials(tilt: float, yaw: float, roll: float) -> tuple[np.ndarray, ...]:
    """dR/dtilt, dR/dyaw, dR/droll, in pose-vector order."""
    rz, rx, ry = _rz(yaw), _rx(tilt), _ry(roll)
    return (
        rz @ _drx(tilt) @ ry,
        _drz(yaw) @ rx @ ry,
        rz @ rx @ _dry(roll),
    )


def transform_apply(t: RigidTransform, points) -> np.ndarray:
    """``R p + T`` for a single point (3,) or a stack (N, 3)."""
    p = np.asarray(points, dtype=float)
    return p @ t.R.T + t.T


def corner_matrix(spec: TargetSpec) -> np.ndarray:
    """Board corners in frame O, rows ordered TL, TR, BL, BR."""
    hw, hh = spec.width / 2.0, spec.height / 2.0
    return np.array([
        [-hw, 0.0, hh],
        [hw, 0.0, hh],
        [-hw, 0.0, -hh],
        [hw, 0.0, -hh],
    ])
