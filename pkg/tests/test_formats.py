"""
Tests for file formats.

Tests:
- PFM byte layout, endianness and bit-exact storage
- 8/16-bit PGM and PPM files
- calib.txt parsing
- Error classes for malformed and missing files
"""

from __future__ import annotations

import struct
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.imaging import ImageKind  # noqa: E402
from edgefuse.utils.errors import InputError, ParseError, ShapeError  # noqa: E402
from edgefuse.utils.formats import (  # noqa: E402
    atomic_write_text,
    encode_pfm,
    read_calibration,
    read_color,
    read_pfm,
    read_pfm_array,
    read_pnm,
    write_pfm,
    write_pgm,
    write_ppm,
)

MIDDLEBURY_CALIB = """cam0=[1758.23 0 953.34; 0 1758.23 552.29; 0 0 1]
cam1=[1758.23 0 953.34; 0 1758.23 552.29; 0 0 1]
doffs=0
baseline=111.53
width=1920
height=1080
"""


class TestPfm:
    """Tests for Portable FloatMap files."""

    def test_layout(self) -> None:
        """Test header text and bottom-to-top little-endian rows."""
        data = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        payload = encode_pfm(data)
        header = b"Pf\n2 2\n-1.0\n"
        assert payload.startswith(header)
        samples = struct.unpack("<4f", payload[len(header) :])
        assert samples == (3.0, 4.0, 1.0, 2.0)

    def test_bit_exact(self, tmp_path: Path) -> None:
        """Test that special values and subnormals survive storage unchanged."""
        data = np.array(
            [[np.nan, np.inf, -np.inf], [1e-40, -0.0, 3.14159274]],
            dtype=np.float32,
        )
        path = write_pfm(tmp_path / "x.pfm", data)
        back = read_pfm_array(path)
        assert back.shape == (2, 3, 1)
        assert back[:, :, 0].tobytes() == data.tobytes()

    def test_big_endian(self, tmp_path: Path) -> None:
        """Test that a positive scale reads big-endian samples."""
        path = tmp_path / "be.pfm"
        path.write_bytes(b"Pf\n2 1\n1.0\n" + struct.pack(">2f", 0.5, -2.0))
        assert read_pfm_array(path)[0, :, 0].tolist() == [0.5, -2.0]

    def test_two_channels_padded(self) -> None:
        """Test that direction fields are stored as three channels."""
        payload = encode_pfm(np.ones((1, 1, 2), dtype=np.float32))
        assert payload.startswith(b"PF\n1 1\n")
        assert struct.unpack("<3f", payload[-12:]) == (1.0, 1.0, 0.0)

    def test_rejects_bad_channel_count(self) -> None:
        """Test that four channels cannot be stored."""
        with pytest.raises(ShapeError):
            encode_pfm(np.zeros((2, 2, 4)))

    def test_malformed(self, tmp_path: Path) -> None:
        """Test bad magic, bad dimensions, zero scale and short rasters."""
        cases = [
            b"P7\n1 1\n-1.0\n\x00\x00\x00\x00",
            b"Pf\n0 1\n-1.0\n",
            b"Pf\n1 1\n0\n\x00\x00\x00\x00",
            b"Pf\n2 2\n-1.0\n\x00\x00\x00\x00",
            b"Pf\n2",
        ]
        for i, payload in enumerate(cases):
            path = tmp_path / f"bad{i}.pfm"
            path.write_bytes(payload)
            with pytest.raises(ParseError):
                read_pfm_array(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that a missing file is an InputError."""
        with pytest.raises(InputError):
            read_pfm_array(tmp_path / "none.pfm")

    def test_kind_validation(self, tmp_path: Path) -> None:
        """Test that reading as probabilities validates the range."""
        path = write_pfm(tmp_path / "p.pfm", np.array([[0.5, 2.0]], dtype=np.float32))
        with pytest.raises(ParseError):
            read_pfm(path, ImageKind.PROBABILITY)


class TestPnm:
    """Tests for binary PGM and PPM files."""

    def test_sixteen_bit_labels(self, tmp_path: Path) -> None:
        """Test that 16-bit PGM keeps large labels."""
        labels = np.array([[0, 1], [300, 65535]])
        back = read_pnm(write_pgm(tmp_path / "l.pgm", labels, sixteen_bit=True))
        assert back.dtype == np.uint16
        assert back.tolist() == labels.tolist()

    def test_eight_bit_clips(self, tmp_path: Path) -> None:
        """Test rounding and clipping of 8-bit gray."""
        back = read_pnm(write_pgm(tmp_path / "g.pgm", np.array([[-5.0, 12.4, 400.0]])))
        assert back.tolist() == [[0, 12, 255]]

    def test_color(self, tmp_path: Path) -> None:
        """Test that a P6 file reads as a color image."""
        rgb = np.zeros((2, 3, 3))
        rgb[1, 2] = [255, 128, 7]
        img = read_color(write_ppm(tmp_path / "c.ppm", rgb))
        assert img.kind is ImageKind.COLOR
        assert img.data[1, 2].tolist() == [255.0, 128.0, 7.0]

    def test_gray_is_not_color(self, tmp_path: Path) -> None:
        """Test that read_color refuses a P5 file."""
        path = write_pgm(tmp_path / "g.pgm", np.zeros((2, 2)))
        with pytest.raises(ParseError):
            read_color(path)

    def test_label_overflow(self, tmp_path: Path) -> None:
        """Test that values past 16 bits are rejected."""
        with pytest.raises(ShapeError):
            write_pgm(tmp_path / "l.pgm", np.array([[70000]]), sixteen_bit=True)

    def test_unsupported_magic(self, tmp_path: Path) -> None:
        """Test that ASCII PNM variants are refused."""
        path = tmp_path / "a.pgm"
        path.write_bytes(b"P2\n1 1\n255\n0\n")
        with pytest.raises(ParseError):
            read_pnm(path)


class TestCalibration:
    """Tests for calib.txt parsing."""

    def test_middlebury(self, tmp_path: Path) -> None:
        """Test focal length, principal point and depth scale."""
        path = tmp_path / "calib.txt"
        path.write_text(MIDDLEBURY_CALIB)
        camera = read_calibration(path)
        assert camera.focal == pytest.approx(1758.23)
        assert camera.cx == pytest.approx(953.34)
        assert camera.cy == pytest.approx(552.29)
        assert camera.baseline_focal == pytest.approx(111.53 * 1758.23)
        assert camera.disparity_offset == 0.0

    def test_missing_baseline(self, tmp_path: Path) -> None:
        """Test that a missing key is a ParseError."""
        path = tmp_path / "calib.txt"
        path.write_text("cam0=[1 0 0; 0 1 0; 0 0 1]\n")
        with pytest.raises(ParseError):
            read_calibration(path)

    def test_bad_matrix_names_line(self, tmp_path: Path) -> None:
        """Test that an unparsable cam0 reports its line."""
        path = tmp_path / "calib.txt"
        path.write_text("baseline=100\ncam0=identity\n")
        with pytest.raises(ParseError) as exc_info:
            read_calibration(path)
        assert exc_info.value.line == 2


class TestAtomicWrite:
    """Tests for atomic writes."""

    def test_no_temp_files_left(self, tmp_path: Path) -> None:
        """Test that only the target remains and parents are created."""
        target = tmp_path / "a" / "b" / "notes.txt"
        atomic_write_text(target, "hello\n")
        assert target.read_text() == "hello\n"
        assert [p.name for p in target.parent.iterdir()] == ["notes.txt"]
