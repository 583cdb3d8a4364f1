"""
Tests for the command-line interface.

These tests verify:
- Subcommand registration and argument errors
- Exit codes for each failure class
- The gt and refine commands end to end on tiny inputs
"""

from __future__ import annotations

import os
import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.cli import COMMANDS, build_parser, run  # noqa: E402
from edgefuse.utils.formats import read_pfm_array, write_pfm  # noqa: E402


@pytest.fixture(autouse=True)
def clean_env():
    """Keep EDGEFUSE_* variables from the developer's shell out of the tests."""
    kept = {k: v for k, v in os.environ.items() if not k.startswith("EDGEFUSE_")}
    with patch.dict(os.environ, kept, clear=True):
        yield


@pytest.fixture
def step_inputs(tmp_path: Path) -> dict[str, Path]:
    """An 8x8 disparity step with contour and direction maps."""
    x0 = np.full((8, 8), 4.0, dtype=np.float32)
    x0[:, 4:] = 9.0
    contour = np.zeros((8, 8), dtype=np.float32)
    contour[:, 3] = 1.0
    directions = np.zeros((8, 8, 2), dtype=np.float32)
    directions[:, 3, 0] = 1.0
    paths = {
        "disparity": tmp_path / "disp.pfm",
        "contour": tmp_path / "contour.pfm",
        "directions": tmp_path / "directions.pfm",
    }
    write_pfm(paths["disparity"], x0)
    write_pfm(paths["contour"], contour)
    write_pfm(paths["directions"], directions)
    return paths


def _refine_args(paths: dict[str, Path], out: Path) -> list[str]:
    return [
        "refine",
        "--disparity",
        str(paths["disparity"]),
        "--contour",
        str(paths["contour"]),
        "--directions",
        str(paths["directions"]),
        "--out",
        str(out),
    ]


class TestParser:
    """Tests for argument parsing."""

    def test_all_commands_registered(self) -> None:
        """Test that every enabled command module adds a subcommand."""
        parser = build_parser()
        args = parser.parse_args(["eval", "--dataset", "d", "--method", "fused=out"])
        assert args.command == "eval"
        assert callable(args.handler)
        assert len([m for m, enabled in COMMANDS if enabled]) == 7

    def test_missing_command(self) -> None:
        """Test that no subcommand is a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            run([])
        assert exc_info.value.code == 2

    def test_gt_needs_normals_or_calib(self) -> None:
        """Test the mutually exclusive normal source."""
        with pytest.raises(SystemExit) as exc_info:
            run(["gt", "--disparity", "d.pfm", "--out", "o"])
        assert exc_info.value.code == 2

    def test_jobs_must_be_positive(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test that --jobs 0 is rejected."""
        with pytest.raises(SystemExit) as exc_info:
            run(["--jobs", "0", *_refine_args(step_inputs, tmp_path / "out.pfm")])
        assert exc_info.value.code == 2


class TestExitCodes:
    """Tests for the error-to-exit-code mapping."""

    def test_missing_input(self, step_inputs: dict[str, Path], tmp_path: Path, capsys) -> None:
        """Test that a missing file exits with the input error code."""
        step_inputs["contour"] = tmp_path / "nope.pfm"
        assert run(_refine_args(step_inputs, tmp_path / "out.pfm")) == 7
        assert "error:" in capsys.readouterr().err

    def test_malformed_pfm(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test that a truncated PFM exits with the parse error code."""
        step_inputs["disparity"].write_bytes(b"Pf\n8 8\n-1.0\n\x00\x00")
        assert run(_refine_args(step_inputs, tmp_path / "out.pfm")) == 3

    def test_shape_mismatch(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test that differently sized inputs exit with the shape error code."""
        write_pfm(step_inputs["contour"], np.zeros((6, 8), dtype=np.float32))
        assert run(_refine_args(step_inputs, tmp_path / "out.pfm")) == 4

    def test_bad_run_config(self, step_inputs: dict[str, Path], tmp_path: Path, capsys) -> None:
        """Test that an unknown config key exits with the parse error code and names the line."""
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("refine.mu = 0.1\nrefine.speed = 3\n")
        code = run(["--config", str(cfg), *_refine_args(step_inputs, tmp_path / "out.pfm")])
        assert code == 3
        assert "bad.cfg:2" in capsys.readouterr().err

    def test_bad_environment(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test that invalid process settings exit with 1."""
        with patch.dict(os.environ, {"EDGEFUSE_LOG_LEVEL": "LOUD"}):
            assert run(_refine_args(step_inputs, tmp_path / "out.pfm")) == 1


class TestCommands:
    """End-to-end runs of the light commands."""

    def test_refine_writes_outputs(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test that refine writes the disparity and its level report."""
        out = tmp_path / "refined.pfm"
        assert run([*_refine_args(step_inputs, out), "--levels", "2"]) == 0
        refined = read_pfm_array(out)
        assert refined.shape == (8, 8, 1)
        assert np.all(np.isfinite(refined))

        report = out.with_suffix(".txt").read_text().splitlines()
        assert report[0].split()[:3] == ["level", "width", "height"]
        assert len(report) == 3

    def test_refine_custom_report(self, step_inputs: dict[str, Path], tmp_path: Path) -> None:
        """Test the --report path override."""
        report = tmp_path / "levels.txt"
        assert run([*_refine_args(step_inputs, tmp_path / "r.pfm"), "--report", str(report)]) == 0
        assert report.exists()

    def test_gt_with_directions(self, tmp_path: Path) -> None:
        """Test that gt writes every map plus the refinement targets."""
        disparity = np.full((12, 12), 10.0, dtype=np.float32)
        disparity[:, 6:] = 20.0
        normals = np.zeros((12, 12, 3), dtype=np.float32)
        normals[:, :, 2] = 1.0
        write_pfm(tmp_path / "disp.pfm", disparity)
        write_pfm(tmp_path / "normals.pfm", normals)
        out = tmp_path / "gt"

        code = run(
            [
                "gt",
                "--disparity",
                str(tmp_path / "disp.pfm"),
                "--normals",
                str(tmp_path / "normals.pfm"),
                "--out",
                str(out),
                "--directions",
            ]
        )
        assert code == 0
        for name in ("contour.pfm", "crease.pfm", "edges.pfm", "gt.txt", "discontinuities.pfm"):
            assert (out / name).exists()
        directions = read_pfm_array(out / "directions.pfm")
        assert directions.shape == (12, 12, 3)
        assert directions[0, 5, 0] == 1.0
        assert read_pfm_array(out / "discontinuities.pfm")[:, 5, 0].all()
