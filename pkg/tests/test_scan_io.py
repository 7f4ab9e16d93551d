import numpy as np
import pytest

from lidar_align.errors import ScanFormatError
from lidar_align.geometry import PoseVector
from lidar_align.scan_io import COLUMNS, SCAN_HEADER, load_scan, save_scan
from lidar_align.simulator import Scene, SensorModel, generate_scan


@pytest.fixture(scope="module")
def scan():
    return generate_scan(SensorModel(), Scene(), PoseVector.from_degrees_mm(yaw=1.0, dx=5.0), seed=9)


def test_round_trip(tmp_path, scan):
    path = tmp_path / "scan.csv"
    save_scan(scan, path)
    loaded = load_scan(path)
    assert len(loaded) == len(scan)
    assert loaded.seed == scan.seed and loaded.truth == scan.truth
    np.testing.assert_array_equal(loaded.ring, scan.ring)
    np.testing.assert_array_equal(loaded.vertical, scan.vertical)
    np.testing.assert_allclose(loaded.range, scan.range, rtol=5e-9)
    np.testing.assert_allclose(loaded.azimuth, scan.azimuth, rtol=5e-9, atol=1e-15)
    np.testing.assert_array_equal(loaded.reflectivity, scan.reflectivity)


def test_save_load_save_is_stable(tmp_path, scan):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    save_scan(scan, first)
    save_scan(load_scan(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_row_count(tmp_path, scan):
    path = tmp_path / "scan.csv"
    save_scan(scan, path)
    lines = path.read_text().splitlines()
    assert lines[0] == SCAN_HEADER
    assert len(lines) - lines.index(COLUMNS) - 1 == len(scan)


def _write(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    return path


@pytest.mark.parametrize("text,match", [
    ("", "empty file"),
    ("#lidar-align-scan v2\n" + COLUMNS + "\n0,1.0,2.0,0.5\n", "unknown header"),
    (SCAN_HEADER + "\n", "missing column header"),
    (SCAN_HEADER + "\nring,az\n", "expected column header"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n", "no beam rows"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,2.0\n", ":3: expected 4 fields"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,2.0,0.5\nx,1.0,2.0,0.5\n", ":4:"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n16,1.0,2.0,0.5\n", "ring 16"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,360.0,2.0,0.5\n", "azimuth"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,-2.0,0.5\n", "range must be positive"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,nan,0.5\n", "range must be positive"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,2.0,1.5\n", "reflectivity"),
    (SCAN_HEADER + "\n" + COLUMNS + "\n0,1.0,2.0,0.5\n0,1.0,2.1,0.5\n", "duplicate"),
    (SCAN_HEADER + "\n#seed=abc\n" + COLUMNS + "\n0,1.0,2.0,0.5\n", ":2: bad metadata"),
])
def test_malformed_files(tmp_path, text, match):
    with pytest.raises(ScanFormatError, match=match):
        load_scan(_write(tmp_path, text))


def test_rows_sorted_and_metadata_optional(tmp_path):
    path = _write(tmp_path, SCAN_HEADER + "\n" + COLUMNS + "\n1,5.0,2.0,0.5\n0,10.0,2.5,0.9\n0,2.0,3.0,0.9\n")
    scan = load_scan(path)
    np.testing.assert_array_equal(scan.ring, [0, 0, 1])
    np.testing.assert_allclose(np.degrees(scan.azimuth), [2.0, 10.0, 5.0])
    np.testing.assert_allclose(scan.range, [3.0, 2.5, 2.0])
    assert scan.seed is None and scan.truth is None and scan.surface is None
