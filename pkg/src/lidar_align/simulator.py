"""Synthetic single-revolution scans of a posed target board.

The sensor fires every ring at every step of an azimuth comb. Spin-speed
fluctuation is modelled as one uniform phase offset per revolution shared by
all beams; range noise is ``N(range_offset, range_noise_sigma**2)`` truncated
at five sigma. Board and clutter are rectangles defined in the board frame O
and moved into the sensor frame L through the true sensor pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from lidar_align.errors import SceneError, ValidationError
from lidar_align.geometry import (
    PoseVector,
    RigidTransform,
    SphericalBeam,
    TargetSpec,
    rotation_from_angles,
    spherical_to_cartesian_array,
)
from lidar_align.preprocess import PlaneModel

BOARD_REFLECTIVITY = 0.9
CLUTTER_REFLECTIVITY = 0.2
NOISE_TRUNCATION = 5.0


def vlp16_vertical_angles() -> tuple[float, ...]:
    return tuple(math.radians(a) for a in range(-15, 16, 2))


@dataclass(frozen=True)
class SensorModel:
    vertical_angles: tuple[float, ...] = field(default_factory=vlp16_vertical_angles)
    azimuth_step: float = math.radians(0.2)
    range_noise_sigma: float = 0.014
    range_offset: float = 0.005
    azimuth_jitter: float = math.radians(0.1)
    max_range: float = 100.0

    def __post_init__(self) -> None:
        angles = np.asarray(self.vertical_angles, dtype=float)
        object.__setattr__(self, "vertical_angles", tuple(float(a) for a in angles))
        if angles.size == 0 or np.any(np.diff(angles) <= 0):
            raise ValidationError("vertical angles must be non-empty and strictly increasing")
        if np.any(np.abs(angles) >= math.pi / 2):
            raise ValidationError("vertical angles must lie inside (-90, 90) degrees")
        if not self.azimuth_step > 0:
            raise ValidationError("azimuth step must be positive")
        if self.range_noise_sigma < 0:
            raise ValidationError("range noise sigma must be >= 0")
        if self.azimuth_jitter < 0:
            raise ValidationError("azimuth jitter must be >= 0")
        if not self.max_range > 0:
            raise ValidationError("max range must be positive")

    @property
    def n_rings(self) -> int:
        return len(self.vertical_angles)

    @property
    def azimuth_count(self) -> int:
        return int(round(2.0 * math.pi / self.azimuth_step))

    def noiseless(self) -> SensorModel:
        return replace(self, range_noise_sigma=0.0, range_offset=0.0, azimuth_jitter=0.0)


@dataclass(frozen=True)
class Rectangle:
    """Finite planar patch in frame O: ``center + s*axis_u + t*axis_v``."""

    center: tuple[float, float, float]
    axis_u: tuple[float, float, float]
    axis_v: tuple[float, float, float]
    half_u: float
    half_v: float
    reflectivity: float = CLUTTER_REFLECTIVITY


def default_clutter(ground_height: float = 0.5, wall_distance: float = 3.5) -> tuple[Rectangle, ...]:
    """A floor under the rig and a wall behind the board."""
    floor = Rectangle(
        center=(0.0, 0.0, -ground_height), axis_u=(1.0, 0.0, 0.0), axis_v=(0.0, 1.0, 0.0),
        half_u=10.0, half_v=wall_distance,
    )
    wall = Rectangle(
        center=(0.0, wall_distance, 1.5 - ground_height), axis_u=(1.0, 0.0, 0.0),
        axis_v=(0.0, 0.0, 1.0), half_u=10.0, half_v=1.5,
    )
    return floor, wall


@dataclass(frozen=True)
class Scene:
    """Board plus clutter.

    ``placement`` is the board center in frame L for a perfectly aligned
    sensor, so the nominal sensor pose in O is ``(I, -placement)``.
    """

    target: TargetSpec = TargetSpec()
    placement: tuple[float, float, float] = (0.7, 2.5, 0.0)
    clutter: tuple[Rectangle, ...] = field(default_factory=default_clutter)

    def __post_init__(self) -> None:
        p = tuple(float(v) for v in self.placement)
        object.__setattr__(self, "placement", p)
        if p[1] <= 0:
            raise SceneError("board center must sit in front of the sensor (positive y)")
        if math.hypot(*p) <= math.hypot(self.target.width, self.target.height) / 2:
            raise SceneError("board intersects the sensor origin")

    @property
    def board_pose(self) -> RigidTransform:
        """Nominal board frame O seen from L."""
        return RigidTransform(np.eye(3), self.placement)

    def sensor_pose(self, truth: PoseVector) -> RigidTransform:
        """True L -> O transform for a sensor misaligned by ``truth``."""
        T = -np.asarray(self.placement) + np.array([truth.dx, truth.dy, truth.dz])
        return RigidTransform(rotation_from_angles(truth), T)


@dataclass(frozen=True, eq=False)
class Scan:
    """One revolution of returns stored column-wise, sorted by (ring, azimuth).

    ``surface`` is simulator ground truth: 0 for board hits, k >= 1 for the
    k-th clutter patch, None for scans read from disk.
    """

    ring: np.ndarray
    azimuth: np.ndarray
    vertical: np.ndarray
    range: np.ndarray
    reflectivity: np.ndarray
    seed: int | None = None
    truth: PoseVector | None = None
    surface: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.ring.size)

    def points(self) -> np.ndarray:
        return spherical_to_cartesian_array(self.range, self.azimuth, self.vertical)

    def beams(self) -> list[SphericalBeam]:
        return [
            SphericalBeam(int(k), float(a), float(w), float(r), float(f))
            for k, a, w, r, f in zip(self.ring, self.azimuth, self.vertical,
                                     self.range, self.reflectivity)
        ]

    def board_mask(self) -> np.ndarray:
        if self.surface is None:
            raise ValidationError("scan carries no simulator ground truth")
        return self.surface == 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scan):
            return NotImplemented
        return (
            self.seed == other.seed and self.truth == other.truth
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("ring", "azimuth", "vertical", "range", "reflectivity"))
        )


def intersect_ray_plane(direction, plane: PlaneModel) -> float | None:
    """Distance along a unit ray from the origin to ``plane``; None on a miss."""
    d = np.asarray(direction, dtype=float)
    denom = float(plane.normal @ d)
    if abs(denom) < 1e-12:
        return None
    t = -plane.d / denom
    return t if t > 0.0 else None


def _cast(directions: np.ndarray, center, normal, axis_u, axis_v, half_u, half_v):
    """Vectorised ray/rectangle intersection in frame L; inf where missed."""
    denom = directions @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (center @ normal) / denom
    ok = (np.abs(denom) >= 1e-12) & (t > 0.0)
    t = np.where(ok, t, np.inf)
    finite = np.isfinite(t)
    hit = directions[finite] * t[finite, None] - center
    inside = (np.abs(hit @ axis_u) <= half_u) & (np.abs(hit @ axis_v) <= half_v)
    tf = t[finite]
    tf[~inside] = np.inf
    t[finite] = tf
    return t


def truncated_normal(rng: np.random.Generator, size, limit: float = NOISE_TRUNCATION) -> np.ndarray:
    """Standard normal samples redrawn until every value lies within +-limit."""
    z = rng.standard_normal(size)
    bad = np.abs(z) > limit
    while bad.any():
        z[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(z) > limit
    return z


def apply_noise(beam: SphericalBeam, sensor: SensorModel, rng: np.random.Generator,
                azimuth_offset: float | None = None) -> SphericalBeam:
    """Perturb one clean return.

    Range gains ``N(range_offset, sigma**2)``; azimuth shifts by
    ``azimuth_offset`` or, when omitted, a uniform draw in +-azimuth_jitter.
    The vertical angle is fixed by the diode geometry and never changes.
    """
    eps = sensor.range_offset
    if sensor.range_noise_sigma > 0:
        eps += sensor.range_noise_sigma * float(truncated_normal(rng, 1)[0])
    if azimuth_offset is None:
        azimuth_offset = (rng.uniform(-sensor.azimuth_jitter, sensor.azimuth_jitter)
                          if sensor.azimuth_jitter > 0 else 0.0)
    return SphericalBeam(
        ring=beam.ring,
        azimuth=float(np.mod(beam.azimuth + azimuth_offset, 2.0 * math.pi)),
        vertical=beam.vertical,
        range=beam.range + eps,
        reflectivity=beam.reflectivity,
    )


def generate_scan(sensor: SensorModel, scene: Scene, truth: PoseVector = PoseVector(),
                  seed: int = 0, max_angle: float | None = None,
                  max_shift: float | None = None) -> Scan:
    """Simulate one revolution of ``sensor`` looking at ``scene``.

    Deterministic for a fixed ``seed``. Raises SceneError when no beam lands
    on the board.
    """
    envelope = {}
    if max_angle is not None:
        envelope["max_angle"] = max_angle
    if max_shift is not None:
        envelope["max_shift"] = max_shift
    truth.check_envelope(**envelope)
    rng = np.random.default_rng(seed)

    phase = rng.uniform(-sensor.azimuth_jitter, sensor.azimuth_jitter) if sensor.azimuth_jitter > 0 else 0.0
    comb = np.mod(np.arange(sensor.azimuth_count) * sensor.azimuth_step + phase, 2.0 * math.pi)
    vertical = np.asarray(sensor.vertical_angles)
    ring_grid, az_grid = np.meshgrid(np.arange(sensor.n_rings), comb, indexing="ij")
    ring_grid, az_grid = ring_grid.ravel(), az_grid.ravel()
    vert_grid = vertical[ring_grid]
    directions = spherical_to_cartesian_array(1.0, az_grid, vert_grid)

    # O -> L: p_L = R^T (p_O - T)
    pose = scene.sensor_pose(truth)
    Rt = pose.R.T
    hw, hh = scene.target.width / 2.0, scene.target.height / 2.0
    board = Rectangle((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 0.0, 1.0), hw, hh,
                      BOARD_REFLECTIVITY)
    surfaces = (board,) + tuple(scene.clutter)
    hits = np.empty((len(surfaces), len(directions)))
    for k, rect in enumerate(surfaces):
        u = Rt @ np.asarray(rect.axis_u, dtype=float)
        v = Rt @ np.asarray(rect.axis_v, dtype=float)
        hits[k] = _cast(directions, Rt @ (np.asarray(rect.center, dtype=float) - pose.T),
                        np.cross(u, v), u, v, rect.half_u, rect.half_v)
    surface = np.argmin(hits, axis=0)
    clean = hits[surface, np.arange(len(directions))]
    keep = np.isfinite(clean) & (clean <= sensor.max_range)
    if not np.any(keep & (surface == 0)):
        raise SceneError("unusable scene: the board is outside the sensor field of view")

    ring_grid, az_grid, vert_grid = ring_grid[keep], az_grid[keep], vert_grid[keep]
    surface, clean = surface[keep], clean[keep]
    eps = np.full(clean.shape, sensor.range_offset)
    if sensor.range_noise_sigma > 0:
        eps += sensor.range_noise_sigma * truncated_normal(rng, clean.shape)
    refl = np.array([s.reflectivity for s in surfaces])[surface]

    order = np.lexsort((az_grid, ring_grid))
    return Scan(
        ring=ring_grid[order],
        azimuth=az_grid[order],
        vertical=vert_grid[order],
        range=(clean + eps)[order],
        reflectivity=refl[order],
        seed=seed,
        truth=truth,
        surface=surface[order],
    )
