"""Target segmentation: Euclidean clustering, ROI selection, RANSAC plane fit
and projection of the ROI onto the fitted plane."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from lidar_align.errors import ClusterError, PlaneFitError, RoiError, ValidationError


@dataclass(frozen=True, eq=False)
class PlaneModel:
    """Plane ``n . p + d = 0`` with unit normal facing the sensor origin (d >= 0)."""

    normal: np.ndarray
    d: float

    def __post_init__(self) -> None:
        n = np.array(self.normal, dtype=float).reshape(3)
        if not np.all(np.isfinite(n)) or not np.isfinite(self.d):
            raise ValidationError("non-finite plane parameters")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValidationError(f"plane normal must be unit length, got |n|={np.linalg.norm(n)}")
        if self.d < 0.0:
            raise ValidationError("plane normal must face the sensor origin (d >= 0)")
        n.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "d", float(self.d))

    @classmethod
    def from_normal_point(cls, normal, point) -> PlaneModel:
        """Normalise ``normal`` and orient it towards the origin."""
        n = np.asarray(normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0.0 or not np.isfinite(norm):
            raise ValidationError("degenerate plane normal")
        n = n / norm
        d = -float(n @ np.asarray(point, dtype=float))
        if d < 0.0:
            n, d = -n, -d
        return cls(n, d)

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.normal + self.d


@dataclass(frozen=True)
class Cluster:
    indices: np.ndarray
    centroid: np.ndarray
    mean_range: float
    mean_reflectivity: float

    @property
    def count(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class RoiCriteria:
    range_min: float = 1.0
    range_max: float = 5.0
    min_count: int = 60
    min_reflectivity: float = 0.5


@dataclass(frozen=True)
class RansacConfig:
    distance_threshold: float = 0.02
    max_iterations: int = 200
    min_inlier_ratio: float = 0.6
    refit_rounds: int = 3
    refit_sigmas: float = 3.0

    def __post_init__(self) -> None:
        if self.distance_threshold <= 0:
            raise ValidationError("RANSAC distance threshold must be positive")
        if self.max_iterations < 1:
            raise ValidationError("RANSAC needs at least one iteration")
        if not 0.0 <= self.min_inlier_ratio <= 1.0:
            raise ValidationError("min_inlier_ratio must lie in [0, 1]")
        if self.refit_rounds < 0:
            raise ValidationError("refit_rounds must be >= 0")
        if not self.refit_sigmas > 0:
            raise ValidationError("refit_sigmas must be positive")


@dataclass(frozen=True)
class PreprocessConfig:
    cluster_tolerance: float = 0.1
    roi: RoiCriteria = RoiCriteria()
    ransac: RansacConfig = RansacConfig()


def cluster_labels(points, tolerance: float) -> np.ndarray:
    """Connected-component label per point under the ``tolerance`` hop graph."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if tolerance <= 0:
        raise ClusterError("cluster tolerance must be positive")
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(pts).query_pairs(tolerance, output_type="ndarray")
    graph = coo_matrix(
        (np.ones(len(pairs), dtype=np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n)
    )
    _, labels = connected_components(graph, directed=False)
    return labels


def euclidean_cluster(points, tolerance: float, ranges=None, reflectivity=None) -> list[Cluster]:
    """Partition ``points`` into clusters linked by hops of at most ``tolerance``.

    ``ranges`` and ``reflectivity`` are per-point attributes averaged into each
    cluster; when omitted the range is the point norm and reflectivity is 0.
    Clusters are returned ordered by their lowest point index.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return []
    labels = cluster_labels(pts, tolerance)
    if ranges is None:
        ranges = np.linalg.norm(pts, axis=1)
    if reflectivity is None:
        reflectivity = np.zeros(len(pts))
    ranges = np.asarray(ranges, dtype=float)
    reflectivity = np.asarray(reflectivity, dtype=float)

    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    clusters = []
    for idx in np.split(order, bounds):
        clusters.append(Cluster(
            indices=idx,
            centroid=pts[idx].mean(axis=0),
            mean_range=float(ranges[idx].mean()),
            mean_reflectivity=float(reflectivity[idx].mean()),
        ))
    clusters.sort(key=lambda c: int(c.indices[0]))
    return clusters


def select_roi(clusters: list[Cluster], criteria: RoiCriteria = RoiCriteria()) -> Cluster:
    """Return the single cluster passing the range, size and reflectivity gates."""
    if not clusters:
        raise RoiError("ROI absent: no clusters to choose from")
    passing = [
        c for c in clusters
        if criteria.range_min <= c.mean_range <= criteria.range_max
        and c.count >= criteria.min_count
        and c.mean_reflectivity >= criteria.min_reflectivity
    ]
    if not passing:
        raise RoiError(
            f"ROI absent: none of {len(clusters)} clusters meets range "
            f"[{criteria.range_min}, {criteria.range_max}] m, count >= {criteria.min_count}, "
            f"reflectivity >= {criteria.min_reflectivity}"
        )
    if len(passing) > 1:
        raise RoiError(f"ROI ambiguous: {len(passing)} clusters qualify as the target")
    return passing[0]


def fit_plane_lstsq(points) -> PlaneModel:
    """Total least-squares plane through ``points`` (smallest singular vector)."""
    pts = np.asarray(points, dtype=float)
    centroid = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    return PlaneModel.from_normal_point(vt[-1], centroid)


def _distinct_triples(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    samples = rng.integers(0, n, size=(count, 3))
    while True:
        dup = ((samples[:, 0] == samples[:, 1]) | (samples[:, 0] == samples[:, 2])
               | (samples[:, 1] == samples[:, 2]))
        if not dup.any():
            return samples
        samples[dup] = rng.integers(0, n, size=(int(dup.sum()), 3))


def _refit_band(residuals: np.ndarray, sigmas: float) -> float:
    # MAD scale of all residuals; tolerates up to half outliers
    scale = 1.4826 * float(np.median(np.abs(residuals)))
    return max(sigmas * scale, _MIN_BAND)


_MIN_BAND = 1e-9


def ransac_plane_fit(points, cfg: RansacConfig = RansacConfig(), seed=0):
    """Fit a plane by 3-point hypotheses scored by inlier count.

    Hypotheses are verified with ``cfg.distance_threshold``. The winner is then
    refined by least squares over the points within ``refit_sigmas`` robust
    standard deviations, repeated ``refit_rounds`` times. Returns
    ``(plane, inlier_indices)`` where the inliers are the refit support.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        raise PlaneFitError(f"plane fit needs >= 3 points, got {n}")
    rng = np.random.default_rng(seed)
    scale = max(float(np.ptp(pts, axis=0).max()), 1e-12)

    if n == 3:
        samples = np.array([[0, 1, 2]])
    else:
        samples = _distinct_triples(rng, n, cfg.max_iterations)
    p0, p1, p2 = pts[samples[:, 0]], pts[samples[:, 1]], pts[samples[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    valid = norms > 1e-12 * scale * scale
    if not valid.any():
        raise PlaneFitError("all RANSAC samples are collinear")
    normals = normals[valid] / norms[valid, None]
    anchors = p0[valid]
    offsets = -np.einsum("ij,ij->i", normals, anchors)
    # all hypotheses scored in one product; ties keep the earliest hypothesis
    counts = (np.abs(pts @ normals.T + offsets) <= cfg.distance_threshold).sum(axis=0)
    best = int(np.argmax(counts))

    plane = PlaneModel.from_normal_point(normals[best], anchors[best])
    residuals = plane.signed_distance(pts)
    inliers = np.flatnonzero(np.abs(residuals) <= cfg.distance_threshold)
    for _ in range(cfg.refit_rounds):
        support = np.flatnonzero(np.abs(residuals) <= _refit_band(residuals, cfg.refit_sigmas))
        if len(support) < 3:
            break
        plane = fit_plane_lstsq(pts[support])
        residuals = plane.signed_distance(pts)
        inliers = support

    ratio = float(np.mean(np.abs(residuals) <= cfg.distance_threshold))
    if ratio < cfg.min_inlier_ratio:
        raise PlaneFitError(
            f"plane fit quality too low: inlier ratio {ratio:.3f} < {cfg.min_inlier_ratio}"
        )
    return plane, inliers


def project_to_plane(points, plane: PlaneModel) -> np.ndarray:
    """Orthogonal projection onto ``plane``: ``p - (n.p + d) n``."""
    pts = np.asarray(points, dtype=float)
    return pts - np.multiply.outer(plane.signed_distance(pts), plane.normal)
