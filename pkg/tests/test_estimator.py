import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidar_align.errors import AlignmentError, RoiError, SolverError
from lidar_align.estimator import (
    PipelineConfig,
    SolverConfig,
    _damped_step,
    _evaluate,
    estimate_alignment,
    jacobian,
    lm_solve,
    nominal_corners,
    residual,
)
from lidar_align.geometry import PoseVector, RigidTransform, TargetSpec, rotation_matrix
from lidar_align.simulator import Scene, SensorModel, generate_scan

CORNERS = nominal_corners(TargetSpec(), (0.7, 2.5, 0.0))
LIMIT = np.array([math.radians(3)] * 3 + [0.03] * 3)


def _features_for(beta, corners=CORNERS):
    """Feature points that the pose ``beta`` maps exactly onto ``corners``."""
    t = RigidTransform.from_pose(PoseVector.from_array(beta)).inverse()
    return corners @ t.R.T + t.T


def _kernel_inputs(beta, feats, corners=CORNERS):
    return (np.asarray(beta, dtype=float), corners.T.reshape(12),
            np.ascontiguousarray(feats.T), feats.sum(axis=0))


def _homogeneous_residual(beta, corners, feats):
    M = np.eye(4)
    M[:3, :3] = rotation_matrix(*beta[:3])
    M[:3, 3] = beta[3:]
    h = np.column_stack([feats, np.ones(4)]) @ M.T
    return (corners - h[:, :3]).reshape(12)


def test_residual_zero_at_truth(rng):
    beta = rng.uniform(-LIMIT, LIMIT)
    assert np.abs(residual(beta, CORNERS, _features_for(beta))).max() < 1e-15


def test_residual_pure_translation():
    feats = CORNERS - [0.01, 0.0, 0.0]
    F = residual(np.zeros(6), CORNERS, feats).reshape(4, 3)
    np.testing.assert_allclose(F[:, 0], 0.01, atol=1e-15)
    np.testing.assert_allclose(F[:, 1:], 0.0, atol=1e-15)


def test_residual_matches_homogeneous_oracle(rng):
    for _ in range(100):
        beta = rng.uniform(-1, 1, 6)
        corners, feats = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        np.testing.assert_allclose(residual(beta, corners, feats),
                                   _homogeneous_residual(beta, corners, feats), atol=1e-14)


def test_jacobian_translation_blocks(rng):
    J = jacobian(rng.uniform(-1, 1, 6), CORNERS, rng.normal(size=(4, 3))).reshape(4, 3, 6)
    for i in range(4):
        assert np.array_equal(J[i, :, 3:], -np.eye(3))


def test_jacobian_at_zero_is_cross_product(rng):
    feats = rng.normal(size=(4, 3))
    J = jacobian(np.zeros(6), CORNERS, feats).reshape(4, 3, 6)
    # tilt about x, yaw about z, roll about y
    for k, axis in enumerate(np.eye(3)[[0, 2, 1]]):
        np.testing.assert_allclose(J[:, :, k], -np.cross(axis, feats), atol=1e-15)


def test_jacobian_matches_central_differences(rng):
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        beta = rng.uniform(-LIMIT * 5, LIMIT * 5)
        feats = _features_for(rng.uniform(-LIMIT, LIMIT)) + rng.normal(scale=0.01, size=(4, 3))
        J = jacobian(beta, CORNERS, feats)
        fd = np.column_stack([
            (residual(beta + h * e, CORNERS, feats) - residual(beta - h * e, CORNERS, feats)) / (2 * h)
            for e in np.eye(6)
        ])
        worst = max(worst, np.linalg.norm(J - fd) / np.linalg.norm(J))
    assert worst < 1e-5


def test_fast_kernel_matches_reference(rng):
    for _ in range(50):
        beta = rng.uniform(-0.5, 0.5, 6)
        feats = _features_for(rng.uniform(-LIMIT, LIMIT)) + rng.normal(scale=0.01, size=(4, 3))
        F_ref, J = residual(beta, CORNERS, feats), jacobian(beta, CORNERS, feats)
        F_flat, cost, C, g_rot, g_trans, B = _evaluate(*_kernel_inputs(beta, feats))
        # the kernel stores residuals coordinate-major
        np.testing.assert_allclose(F_flat, F_ref.reshape(4, 3).T.reshape(12), atol=1e-14)
        assert cost == pytest.approx(0.5 * F_ref @ F_ref, rel=1e-12)
        JtJ, JtF = J.T @ J, J.T @ F_ref
        np.testing.assert_allclose(C, JtJ[:3, :3], atol=1e-12)
        np.testing.assert_allclose(B, JtJ[:3, 3:], atol=1e-12)
        np.testing.assert_allclose(np.concatenate([g_rot, g_trans]), JtF, atol=1e-12)
        for lam in (0.0, 0.3, 7.0):
            A = JtJ + lam * np.diag(np.diag(JtJ))
            step = _damped_step(C, g_rot, g_trans, B, lam)
            np.testing.assert_allclose(step, np.linalg.solve(A, JtF), rtol=1e-8, atol=1e-12)


def test_translation_block_is_four_identity(rng):
    J = jacobian(rng.uniform(-1, 1, 6), CORNERS, rng.normal(size=(4, 3)))
    assert np.array_equal((J.T @ J)[3:, 3:], 4.0 * np.eye(3))


def test_solve_exact_corners_gives_zero():
    report = lm_solve(CORNERS, CORNERS)
    assert np.array_equal(report.pose.as_array(), np.zeros(6))
    assert report.cost == 0.0 and report.converged


def test_solve_pure_yaw():
    beta = np.array([0.0, math.radians(2.0), 0, 0, 0, 0])
    report = lm_solve(CORNERS, _features_for(beta))
    assert np.abs(report.pose.as_array() - beta).max() < 1e-6
    assert report.converged


@given(st.lists(st.floats(-1.0, 1.0), min_size=6, max_size=6))
@settings(max_examples=30, deadline=None)
def test_exact_recovery_in_envelope(unit):
    beta = np.array(unit) * LIMIT
    report = lm_solve(CORNERS, _features_for(beta))
    assert np.abs(report.pose.as_array() - beta).max() < 1e-6


def test_cost_trace_never_increases(rng):
    for _ in range(10):
        beta = rng.uniform(-LIMIT, LIMIT)
        feats = _features_for(beta) + rng.normal(scale=0.02, size=(4, 3))
        trace = np.array(lm_solve(CORNERS, feats, trace=True).cost_trace)
        assert len(trace) > 2
        assert np.all(np.diff(trace) <= 0.0)


def test_corner_residuals_reported(rng):
    feats = _features_for(rng.uniform(-LIMIT, LIMIT)) + rng.normal(scale=0.01, size=(4, 3))
    report = lm_solve(CORNERS, feats)
    F = residual(report.pose.as_array(), CORNERS, feats).reshape(4, 3)
    np.testing.assert_allclose(report.corner_residuals, np.linalg.norm(F, axis=1), atol=1e-12)
    assert report.cost == pytest.approx(0.5 * np.sum(F ** 2), rel=1e-9)


def test_degenerate_features_raise():
    with pytest.raises(SolverError):
        lm_solve(CORNERS, np.tile([0.7, 2.5, 0.0], (4, 1)))


def test_iteration_cap_reports_not_converged():
    beta = np.array([0.0, math.radians(2.0), 0, 0.01, 0, 0])
    report = lm_solve(CORNERS, _features_for(beta), SolverConfig(max_iterations=3))
    assert report.iterations == 3 and not report.converged


def test_pipeline_zero_noise_head_on(noiseless_sensor, head_on_scene):
    scan = generate_scan(noiseless_sensor, head_on_scene)
    report = estimate_alignment(scan, PipelineConfig(placement=head_on_scene.placement))
    units = report.pose.to_degrees_mm()
    assert report.converged
    assert max(abs(units[k]) for k in ("tilt_deg", "yaw_deg", "roll_deg")) <= 0.3
    assert abs(units["dx_mm"]) <= 5.0


def test_pipeline_zero_noise_default_scene(noiseless_sensor):
    truth = PoseVector.from_degrees_mm(yaw=1.5, dx=-10.0)
    report = estimate_alignment(generate_scan(noiseless_sensor, Scene(), truth))
    err = report.pose.as_array() - truth.as_array()
    assert np.abs(np.degrees(err[:3])).max() <= 0.3
    assert abs(err[3]) <= 0.005


def test_pipeline_feature_indices_point_into_scan():
    scan = generate_scan(SensorModel(), Scene(), seed=2)
    report = estimate_alignment(scan)
    assert np.all(scan.board_mask()[report.features.indices])
    raw = scan.points()[report.features.indices]
    # projection moves points only along the normal, by at most a few noise sigmas
    assert np.linalg.norm(raw - report.features.points, axis=1).max() < 0.07
    assert report.roi_size == scan.board_mask().sum()
    assert report.latency_ms > 0


def test_pipeline_board_absent():
    scan = generate_scan(SensorModel(), Scene(placement=(0.0, 7.0, 0.0), clutter=()))
    with pytest.raises(RoiError) as info:
        estimate_alignment(scan)
    assert info.value.stage == "roi"
    assert str(info.value).startswith("[roi] ROI absent")


def test_pipeline_wraps_foreign_errors():
    scan = generate_scan(SensorModel(), Scene(), seed=0)
    broken = replace(scan, range=np.full(len(scan), np.nan))
    with pytest.raises(AlignmentError) as info:
        estimate_alignment(broken)
    assert info.value.stage == "convert"


def test_yaw_equivariance():
    """Adding a yaw offset shifts the mean yaw estimate by the same amount."""
    def mean_yaw(truth):
        return np.mean([estimate_alignment(generate_scan(SensorModel(), Scene(), truth, seed=s),
                                           PipelineConfig(ransac_seed=s)).pose.yaw
                        for s in range(50)])
    base = PoseVector.from_degrees_mm(tilt=0.5, roll=-0.5, dx=5.0)
    shifted = replace(base, yaw=math.radians(1.0))
    delta = math.degrees(mean_yaw(shifted) - mean_yaw(base))
    assert delta == pytest.approx(1.0, abs=0.15)
