"""Scan CSV files.

Layout::

    #lidar-align-scan v1
    #seed=42                      (optional)
    #truth_si=tilt,yaw,roll,dx,dy,dz   (optional, radians and meters)
    ring,azimuth_deg,range_m,reflectivity
    0,15.2,2.61034871,0.9
    ...

The vertical angle of each row comes from the ring index through the sensor
model. Rows are sorted by (ring, azimuth) on load.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from lidar_align.errors import ScanFormatError
from lidar_align.geometry import PoseVector
from lidar_align.simulator import Scan, SensorModel

SCAN_HEADER = "#lidar-align-scan v1"
COLUMNS = "ring,azimuth_deg,range_m,reflectivity"


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def save_scan(scan: Scan, path) -> None:
    lines = [SCAN_HEADER]
    if scan.seed is not None:
        lines.append(f"#seed={int(scan.seed)}")
    if scan.truth is not None:
        lines.append("#truth_si=" + ",".join(repr(float(v)) for v in scan.truth.as_array()))
    lines.append(COLUMNS)
    azimuth_deg = np.degrees(scan.azimuth)
    for ring, az, r, refl in zip(scan.ring, azimuth_deg, scan.range, scan.reflectivity):
        lines.append(f"{int(ring)},{_fmt(az)},{_fmt(r)},{_fmt(refl)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_scan(path, sensor: SensorModel | None = None) -> Scan:
    sensor = sensor or SensorModel()
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise ScanFormatError(f"{path}: empty file")
    if lines[0].strip() != SCAN_HEADER:
        raise ScanFormatError(
            f"{path}:1: unknown header {lines[0].strip()!r}, expected {SCAN_HEADER!r}"
        )
    seed = None
    truth = None
    lineno = 1
    body = iter(enumerate(lines[1:], start=2))
    for lineno, line in body:
        line = line.strip()
        if not line.startswith("#"):
            break
        key, _, value = line[1:].partition("=")
        try:
            if key == "seed":
                seed = int(value)
            elif key == "truth_si":
                truth = PoseVector.from_array([float(v) for v in value.split(",")])
        except ValueError as exc:
            raise ScanFormatError(f"{path}:{lineno}: bad metadata {line!r}: {exc}") from exc
    else:
        raise ScanFormatError(f"{path}: missing column header")
    if line != COLUMNS:
        raise ScanFormatError(f"{path}:{lineno}: expected column header {COLUMNS!r}")

    n_rings = sensor.n_rings
    rings, azimuths, ranges, refls = [], [], [], []
    for lineno, line in body:
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise ScanFormatError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
        try:
            ring = int(fields[0])
            az, r, refl = float(fields[1]), float(fields[2]), float(fields[3])
        except ValueError as exc:
            raise ScanFormatError(f"{path}:{lineno}: {exc}") from exc
        if not 0 <= ring < n_rings:
            raise ScanFormatError(f"{path}:{lineno}: ring {ring} outside sensor's {n_rings} rings")
        if not (math.isfinite(az) and 0.0 <= az < 360.0):
            raise ScanFormatError(f"{path}:{lineno}: azimuth {az} outside [0, 360)")
        if not (math.isfinite(r) and r > 0.0):
            raise ScanFormatError(f"{path}:{lineno}: range must be positive, got {r}")
        if not 0.0 <= refl <= 1.0:
            raise ScanFormatError(f"{path}:{lineno}: reflectivity {refl} outside [0, 1]")
        rings.append(ring)
        azimuths.append(az)
        ranges.append(r)
        refls.append(refl)
    if not rings:
        raise ScanFormatError(f"{path}: no beam rows")

    ring = np.array(rings, dtype=int)
    azimuth = np.radians(np.array(azimuths))
    order = np.lexsort((azimuth, ring))
    ring, azimuth = ring[order], azimuth[order]
    if np.any((np.diff(ring) == 0) & (np.diff(azimuth) == 0)):
        raise ScanFormatError(f"{path}: duplicate (ring, azimuth) rows")
    return Scan(
        ring=ring,
        azimuth=azimuth,
        vertical=np.asarray(sensor.vertical_angles)[ring],
        range=np.array(ranges)[order],
        reflectivity=np.array(refls)[order],
        seed=seed,
        truth=truth,
    )
