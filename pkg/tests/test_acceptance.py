"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; conftest prints them at the end of the
session. Run directly (``python tests/test_acceptance.py``) to get just the
table. Criterion 8 (hardware bench numbers) has no desk-scale check.
"""

import math
import time

import numpy as np

from lidar_align.config import RunConfig
from lidar_align.estimator import PipelineConfig, estimate_alignment, jacobian, lm_solve, nominal_corners, residual
from lidar_align.geometry import PoseVector, RigidTransform, TargetSpec, rotation_matrix
from lidar_align.montecarlo import run_montecarlo
from lidar_align.preprocess import PlaneModel, RansacConfig, project_to_plane, ransac_plane_fit
from lidar_align.simulator import Scene, SensorModel, generate_scan

RESULTS = []


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _units(result, values):
    u = result.in_units(values)
    return np.array([u["tilt"], u["roll"], u["yaw"], u["dx"]])


def test_criterion_1_oracle_recovery():
    rng = np.random.default_rng(2024)
    corners = nominal_corners(TargetSpec(), (0.7, 2.5, 0.0))
    limit = np.array([math.radians(3.0)] * 3 + [0.030] * 3)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(100):
        beta = rng.uniform(-limit, limit)
        t = RigidTransform.from_pose(PoseVector.from_array(beta)).inverse()
        feats = corners @ t.R.T + t.T
        est = lm_solve(corners, feats).pose.as_array()
        worst = max(worst, np.abs(est - beta).max())
    elapsed = time.perf_counter() - start
    record("1 oracle recovery", worst <= 1e-6 and elapsed < 5.0,
           f"max error {worst:.2e} (<= 1e-6), {elapsed:.2f} s (< 5 s)")


def test_criterion_2_yaw_sweep():
    start = time.perf_counter()
    result = run_montecarlo(RunConfig(), "yaw-sweep")
    elapsed = time.perf_counter() - start
    acc = _units(result, result.accuracy)[2]
    prec = _units(result, result.precision)[2]
    ok = abs(acc) <= 0.15 and prec <= 0.2 and elapsed < 120 and result.failure_rate == 0
    record("2 yaw sweep", ok,
           f"yaw accuracy {acc:+.4f} deg (|.| <= 0.15), precision {prec:.4f} deg (<= 0.2), "
           f"{elapsed:.0f} s (< 120 s), failure rate {result.failure_rate:.3f}")


def test_criterion_3_x_sweep():
    result = run_montecarlo(RunConfig(), "x-sweep")
    acc = _units(result, result.accuracy)[3]
    prec = _units(result, result.precision)[3]
    ok = abs(acc) <= 3.0 and prec <= 10.0 and result.failure_rate == 0
    record("3 x sweep", ok,
           f"dx accuracy {acc:+.3f} mm (|.| <= 3), precision {prec:.3f} mm (<= 10), "
           f"failure rate {result.failure_rate:.3f}")


def test_criterion_4_table_envelope():
    start = time.perf_counter()
    result = run_montecarlo(RunConfig(), "random")
    elapsed = time.perf_counter() - start
    acc = np.abs(_units(result, result.accuracy))
    prec = _units(result, result.precision)
    acc_lim = np.array([0.02, 0.56, 0.08, 2.2])
    prec_lim = np.array([0.30, 0.40, 0.2, 9.6])
    ok = (np.all(acc <= acc_lim) and np.all(prec <= prec_lim) and elapsed < 600
          and result.failure_rate == 0)
    fmt = lambda v: "(" + ", ".join(f"{x:.4f}" for x in v) + ")"
    record("4 random-pose envelope", ok,
           f"|accuracy| {fmt(acc)} <= {fmt(acc_lim)}, precision {fmt(prec)} <= {fmt(prec_lim)} "
           f"(tilt deg, roll deg, yaw deg, dx mm), {elapsed:.0f} s (< 600 s)")


def test_criterion_5_beam_geometry():
    scan = generate_scan(SensorModel().noiseless(), Scene(placement=(0.0, 2.5, 0.0), clutter=()))
    mask = scan.board_mask()
    pts, rings = scan.points()[mask], scan.ring[mask]
    spacing = np.concatenate([np.diff(np.sort(pts[rings == k][:, 0])) for k in np.unique(rings)])
    heights = np.array([pts[rings == k][:, 2].mean() for k in np.unique(rings)])
    gaps = np.diff(heights)
    ok = (np.all(np.abs(spacing - 0.009) <= 0.001) and np.all(np.abs(gaps - 0.087) <= 0.005))
    record("5 beam geometry", ok,
           f"spacing {spacing.min() * 1e3:.2f}..{spacing.max() * 1e3:.2f} mm (9 +- 1), "
           f"ring gap {gaps.min() * 1e3:.2f}..{gaps.max() * 1e3:.2f} mm (87 +- 5)")


def test_criterion_6_latency():
    sensor, scene = SensorModel(), Scene()
    scans = [generate_scan(sensor, scene, seed=s) for s in range(100)]
    estimate_alignment(scans[0])  # warm-up
    latencies = np.array([estimate_alignment(s, PipelineConfig(ransac_seed=k)).latency_ms
                          for k, s in enumerate(scans)])
    median = float(np.median(latencies))
    record("6 latency", median <= 60.0,
           f"median {median:.1f} ms (<= 60), p90 {np.percentile(latencies, 90):.1f} ms, "
           f"max {latencies.max():.1f} ms over 100 scans of ~{len(scans[0])} points")


def test_criterion_7_numerical_properties():
    rng = np.random.default_rng(7)
    corners = nominal_corners(TargetSpec(), (0.7, 2.5, 0.0))

    h, jac_err = 1e-6, 0.0
    for _ in range(100):
        beta = rng.uniform(-0.3, 0.3, 6)
        feats = corners + rng.normal(scale=0.05, size=(4, 3))
        J = jacobian(beta, corners, feats)
        fd = np.column_stack([
            (residual(beta + h * e, corners, feats) - residual(beta - h * e, corners, feats)) / (2 * h)
            for e in np.eye(6)
        ])
        jac_err = max(jac_err, np.linalg.norm(J - fd) / np.linalg.norm(J))

    orth = 0.0
    for angles in rng.uniform(-math.pi, math.pi, size=(10_000, 3)):
        R = rotation_matrix(*angles)
        orth = max(orth, np.abs(R.T @ R - np.eye(3)).max(), abs(np.linalg.det(R) - 1.0))

    idem = 0.0
    for _ in range(100):
        n = rng.normal(size=3)
        plane = PlaneModel(n / np.linalg.norm(n), float(rng.uniform(0, 5)))
        once = project_to_plane(rng.uniform(-5, 5, size=(50, 3)), plane)
        idem = max(idem, np.abs(project_to_plane(once, plane) - once).max())

    ransac_err = 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        n = np.array([r.uniform(-0.2, 0.2), -1.0, r.uniform(-0.2, 0.2)])
        n /= np.linalg.norm(n)
        a = np.cross(n, [0.0, 0.0, 1.0])
        a /= np.linalg.norm(a)
        b = np.cross(n, a)
        uv = r.uniform(-0.5, 0.5, size=(70, 2))
        inliers = -2.5 * n + uv[:, :1] * a + uv[:, 1:] * b
        outliers = r.uniform([-1, 1.5, -1], [1, 3.5, 1], size=(30, 3))
        plane, _ = ransac_plane_fit(np.vstack([inliers, outliers]),
                                    RansacConfig(min_inlier_ratio=0.5), seed=seed)
        ransac_err = max(ransac_err, math.degrees(math.acos(min(1.0, abs(plane.normal @ n)))))

    ok = jac_err < 1e-5 and orth < 1e-12 and idem < 1e-12 and ransac_err <= 0.5
    record("7 numerical properties", ok,
           f"jacobian rel err {jac_err:.1e} (< 1e-5), orthonormality {orth:.1e} (< 1e-12), "
           f"idempotence {idem:.1e} (< 1e-12), RANSAC normal {ransac_err:.2e} deg (<= 0.5)")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    print("8 hardware bench: not reproducible at desk scale; covered by 2-4 plus 1 and 7")
