"""Corner-correspondence pose solver and the end-to-end alignment pipeline."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from lidar_align.errors import AlignmentError, SolverError, ValidationError
from lidar_align.features import CornerFeatures, extract_corner_features
from lidar_align.geometry import (
    PoseVector,
    TargetSpec,
    corner_matrix,
    rotation_matrix,
    rotation_partials,
)
from lidar_align.preprocess import (
    PlaneModel,
    PreprocessConfig,
    euclidean_cluster,
    project_to_plane,
    ransac_plane_fit,
    select_roi,
)


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 0.02
    lambda0: float = 0.3
    max_iterations: int = 2000
    step_tolerance: float = 1e-9
    cost_tolerance: float = 1e-18
    initial: tuple[float, ...] = (0.0,) * 6

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise ValidationError("eta must be positive")
        if self.lambda0 < 0:
            raise ValidationError("lambda0 must be >= 0")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not (self.step_tolerance > 0 and self.cost_tolerance > 0):
            raise ValidationError("tolerances must be positive")
        if len(self.initial) != 6:
            raise ValidationError("initial pose needs 6 components")


@dataclass(frozen=True)
class EstimateReport:
    pose: PoseVector
    cost: float
    iterations: int
    corner_residuals: np.ndarray
    converged: bool
    cost_trace: tuple[float, ...] = ()
    features: CornerFeatures | None = field(default=None, repr=False)
    plane: PlaneModel | None = field(default=None, repr=False)
    roi_size: int = 0
    latency_ms: float = float("nan")


def _features_array(features) -> np.ndarray:
    if isinstance(features, CornerFeatures):
        return features.points
    return np.asarray(features, dtype=float).reshape(4, 3)


def residual(beta, corners, features) -> np.ndarray:
    """Stacked ``c_i - (R p_i + T)`` for the four correspondences, shape (12,)."""
    b = np.asarray(beta, dtype=float)
    p = _features_array(features)
    R = rotation_matrix(b[0], b[1], b[2])
    return (np.asarray(corners, dtype=float) - (p @ R.T + b[3:])).reshape(12)


def jacobian(beta, corners, features) -> np.ndarray:
    """Analytic d(residual)/d(beta), shape (12, 6)."""
    b = np.asarray(beta, dtype=float)
    p = _features_array(features)
    J = np.empty((4, 3, 6))
    for k, dR in enumerate(rotation_partials(b[0], b[1], b[2])):
        J[:, :, k] = -(p @ dR.T)
    J[:, :, 3:] = -np.eye(3)
    return J.reshape(12, 6)


def _wrap(angle: float) -> float:
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def _stacked_rotation(b) -> np.ndarray:
    """R and its three partials (tilt, yaw, roll) as a (4, 3, 3) array."""
    ct, st = math.cos(b[0]), math.sin(b[0])
    cy, sy = math.cos(b[1]), math.sin(b[1])
    cr, sr = math.cos(b[2]), math.sin(b[2])
    a, e = cy * cr - sy * st * sr, cy * sr + sy * st * cr
    f, h = sy * cr + cy * st * sr, sy * sr - cy * st * cr
    return np.array([
        a, -sy * ct, e,
        f, cy * ct, h,
        -ct * sr, st, ct * cr,

        -sy * ct * sr, sy * st, sy * ct * cr,
        cy * ct * sr, -cy * st, -cy * ct * cr,
        st * sr, ct, -st * cr,

        -f, -cy * ct, -h,
        a, -sy * ct, e,
        0.0, 0.0, 0.0,

        -cy * sr - sy * st * cr, 0.0, cy * cr - sy * st * sr,
        -sy * sr + cy * st * cr, 0.0, sy * cr + cy * st * sr,
        -ct * cr, 0.0, -ct * sr,
    ]).reshape(4, 3, 3)


def _evaluate(b, c_flat, pT, p_sum):
    """Cost plus the blocks of J^T J and J^T F needed for one update.

    J has rotation columns ``-dR_k p_i`` and translation columns ``-I``, so the
    translation block of J^T J is ``4 I`` and the cross block is
    ``dR_k . sum(p_i)``. One Gram product of ``[F; dR_k p]`` yields the rest.
    """
    S = _stacked_rotation(b)
    W = (S @ pT).reshape(4, 12)
    W[0] = c_flat - W[0] - np.repeat(b[3:], 4)
    G = (W @ W.T).tolist()
    g_trans = (-W[0].reshape(3, 4).sum(axis=1)).tolist()
    B = (S[1:] @ p_sum).tolist()
    C = [row[1:] for row in G[1:]]
    g_rot = [-G[k][0] for k in (1, 2, 3)]
    return W[0], 0.5 * G[0][0], C, g_rot, g_trans, B


def _solve3(M, r):
    """Cramer's rule for a 3x3 system given as nested lists."""
    (a, b, c), (d, e, f), (g, h, i) = M
    co0, co1, co2 = e * i - f * h, f * g - d * i, d * h - e * g
    det = a * co0 + b * co1 + c * co2
    if not math.isfinite(det) or abs(det) < 1e-300:
        raise SolverError("normal matrix is singular: degenerate feature geometry")
    x0 = (r[0] * co0 + b * (f * r[2] - r[1] * i) + c * (r[1] * h - e * r[2])) / det
    x1 = (a * (r[1] * i - f * r[2]) + r[0] * co1 + c * (d * r[2] - r[1] * g)) / det
    x2 = (a * (e * r[2] - r[1] * h) + b * (r[1] * g - d * r[2]) + r[0] * co2) / det
    return x0, x1, x2


def _damped_step(C, g_rot, g_trans, B, lam: float, n_points: int = 4) -> list[float]:
    """Solve ``(J^T J + lam diag(J^T J)) x = J^T F`` by eliminating translation."""
    t_diag = n_points * (1.0 + lam)
    S = [
        [C[k][l] * (1.0 + lam if k == l else 1.0)
         - (B[k][0] * B[l][0] + B[k][1] * B[l][1] + B[k][2] * B[l][2]) / t_diag
         for l in range(3)]
        for k in range(3)
    ]
    rhs = [g_rot[k] - (B[k][0] * g_trans[0] + B[k][1] * g_trans[1] + B[k][2] * g_trans[2]) / t_diag
           for k in range(3)]
    x_rot = _solve3(S, rhs)
    x_trans = [
        (g_trans[j] - (B[0][j] * x_rot[0] + B[1][j] * x_rot[1] + B[2][j] * x_rot[2])) / t_diag
        for j in range(3)
    ]
    return [*x_rot, *x_trans]


def lm_solve(corners, features, cfg: SolverConfig = SolverConfig(),
             trace: bool = False) -> EstimateReport:
    """Minimise ``0.5 * |residual|^2`` over the six pose parameters.

    Update: ``beta -= eta * (J^T J + lam * diag(J^T J))^-1 J^T F``. ``lam``
    halves after an accepted step and doubles after a rejected one, so the
    cost of accepted iterates never increases.
    """
    c = np.asarray(corners, dtype=float).reshape(4, 3)
    p = _features_array(features)
    c_flat, pT, p_sum = c.T.reshape(12), np.ascontiguousarray(p.T), p.sum(axis=0)
    beta = np.asarray(cfg.initial, dtype=float).copy()

    F, cost, C, g_rot, g_trans, B = _evaluate(beta, c_flat, pT, p_sum)
    A = np.block([[np.array(C), np.array(B)], [np.array(B).T, 4.0 * np.eye(3)]])
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e12:
        raise SolverError("normal matrix is singular: degenerate feature geometry")

    lam = cfg.lambda0
    eta = cfg.eta
    history = [cost] if trace else None
    converged = False
    iterations = 0
    while iterations < cfg.max_iterations:
        iterations += 1
        step = [-eta * x for x in _damped_step(C, g_rot, g_trans, B, lam)]
        candidate = beta + step
        evaluated = _evaluate(candidate, c_flat, pT, p_sum)
        small_step = max(abs(x) for x in step) < cfg.step_tolerance
        if evaluated[1] <= cost:
            drop = cost - evaluated[1]
            beta = candidate
            F, cost, C, g_rot, g_trans, B = evaluated
            lam *= 0.5
            if history is not None:
                history.append(cost)
            if small_step or drop < cfg.cost_tolerance:
                converged = True
                break
        else:
            lam *= 2.0
            if small_step:
                converged = True
                break

    pose = PoseVector(_wrap(beta[0]), _wrap(beta[1]), _wrap(beta[2]), *beta[3:])
    return EstimateReport(
        pose=pose,
        cost=cost,
        iterations=iterations,
        corner_residuals=np.linalg.norm(F.reshape(3, 4), axis=0),
        converged=converged,
        cost_trace=tuple(history) if history is not None else (),
    )


@dataclass(frozen=True)
class PipelineConfig:
    target: TargetSpec = TargetSpec()
    placement: tuple[float, float, float] = (0.7, 2.5, 0.0)
    preprocess: PreprocessConfig = PreprocessConfig()
    solver: SolverConfig = SolverConfig()
    ransac_seed: int = 0


def nominal_corners(target: TargetSpec, placement) -> np.ndarray:
    """Board corners relative to the nominal sensor origin, in O axes.

    With the nominal sensor pose ``(I, -placement)`` the solver unknowns become
    the misalignment itself: ``c_i + placement = R p_i + delta``.
    """
    return corner_matrix(target) + np.asarray(placement, dtype=float)


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValidationError as exc:
        # bad data surfacing mid-pipeline: attribute it to the stage that saw it
        exc.stage = name
        raise
    except AlignmentError:
        raise
    except Exception as exc:  # re-raise foreign failures with the stage attached
        raise AlignmentError(f"{type(exc).__name__}: {exc}", stage=name) from exc


def estimate_alignment(scan, cfg: PipelineConfig = PipelineConfig()) -> EstimateReport:
    """Scan -> misalignment estimate, running every preprocessing stage."""
    start = time.perf_counter()
    pts = _stage("convert", scan.points)
    pre = cfg.preprocess
    clusters = _stage("cluster", euclidean_cluster, pts, pre.cluster_tolerance,
                      scan.range, scan.reflectivity)
    roi = _stage("roi", select_roi, clusters, pre.roi)
    roi_pts = pts[roi.indices]
    plane, _ = _stage("ransac", ransac_plane_fit, roi_pts, pre.ransac, cfg.ransac_seed)
    projected = _stage("project", project_to_plane, roi_pts, plane)
    local = _stage("features", extract_corner_features, projected, plane,
                   scan.ring[roi.indices])
    features = CornerFeatures(
        indices=roi.indices[local.indices], points=local.points, range=local.range,
        azimuth=local.azimuth, vertical=local.vertical,
    )
    corners = nominal_corners(cfg.target, cfg.placement)
    report = _stage("solver", lm_solve, corners, features, cfg.solver)
    return EstimateReport(
        pose=report.pose,
        cost=report.cost,
        iterations=report.iterations,
        corner_residuals=report.corner_residuals,
        converged=report.converged,
        features=features,
        plane=plane,
        roi_size=roi.count,
        latency_ms=(time.perf_counter() - start) * 1e3,
    )
