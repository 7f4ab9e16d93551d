"""Pick the four beams nearest the board corners from the projected ROI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lidar_align.errors import FeatureError
from lidar_align.geometry import cartesian_to_spherical
from lidar_align.preprocess import PlaneModel

CORNER_NAMES = ("TL", "TR", "BL", "BR")
# (sign of u, sign of v) maximised for each corner, in corner_matrix order
_CORNER_SIGNS = np.array([[-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])


@dataclass(frozen=True, eq=False)
class CornerFeatures:
    """Four feature beams ordered TL, TR, BL, BR.

    ``indices`` point into the array handed to :func:`extract_corner_features`.
    ``points`` are the projected Cartesian positions in frame L and
    ``range``/``azimuth``/``vertical`` are recomputed from them.
    """

    indices: np.ndarray
    points: np.ndarray
    range: np.ndarray
    azimuth: np.ndarray
    vertical: np.ndarray

    @classmethod
    def from_points(cls, points, indices=None) -> CornerFeatures:
        pts = np.asarray(points, dtype=float).reshape(4, 3)
        idx = np.arange(4) if indices is None else np.asarray(indices, dtype=int)
        r, az, w = cartesian_to_spherical(pts)
        return cls(idx, pts, r, az, w)


def plane_basis(plane: PlaneModel) -> tuple[np.ndarray, np.ndarray]:
    """In-plane axes ``(u, v)``: v is board-up, u board-right seen from the sensor."""
    n = plane.normal
    up = np.array([0.0, 0.0, 1.0])
    v = up - (up @ n) * n
    norm = np.linalg.norm(v)
    if norm < 1e-6:
        raise FeatureError("plane normal is vertical; board cannot lie face-up")
    v = v / norm
    u = np.cross(v, n)
    return u / np.linalg.norm(u), v


def _pick(score: np.ndarray, abs_u: np.ndarray) -> int:
    candidates = np.flatnonzero(score == score.max())
    if candidates.size == 1:
        return int(candidates[0])
    # larger |u| wins, then the lower index (stable argmax)
    return int(candidates[np.argmax(abs_u[candidates])])


def extract_corner_features(projected, plane: PlaneModel, rings=None) -> CornerFeatures:
    """Select the quadrant-extremal point for each corner.

    In plane coordinates ``(u, v)`` about the centroid, TL maximises ``-u+v``,
    TR ``u+v``, BL ``-u-v`` and BR ``u-v``.
    """
    pts = np.asarray(projected, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise FeatureError(f"need at least 4 ROI points, got {len(pts)}")
    if rings is not None and np.unique(np.asarray(rings)).size < 2:
        raise FeatureError("insufficient vertical coverage: ROI spans a single ring")
    u_axis, v_axis = plane_basis(plane)
    rel = pts - pts.mean(axis=0)
    uv = np.column_stack([rel @ u_axis, rel @ v_axis])
    scores = uv @ _CORNER_SIGNS.T
    abs_u = np.abs(uv[:, 0])
    chosen = [_pick(scores[:, k], abs_u) for k in range(4)]
    if len(set(chosen)) < 4:
        raise FeatureError(
            "insufficient vertical coverage: corner selection collapsed to "
            f"{len(set(chosen))} distinct points"
        )
    return CornerFeatures.from_points(pts[chosen], chosen)
