"""
Tests for boundary evaluation.

Tests:
- Boundary precision/recall against a brute-force distance oracle
- PR curves over hierarchy thresholds
- ODS/OIS summaries
- Fusion baselines
- CSV and summary table output
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.evaluator import (  # noqa: E402
    BaselineMode,
    BoundaryPR,
    EvalConfig,
    OdsOis,
    baseline_fuse,
    boundary_pr,
    evaluate,
    format_curve,
    format_summary,
    gt_boundaries,
    ods_ois,
    pr_curve,
)
from edgefuse.segmenter import SegmentConfig, StrengthenMode, segment  # noqa: E402
from edgefuse.utils.errors import InputError, ShapeError  # noqa: E402


def _oracle(pred: np.ndarray, gt: np.ndarray, radius: int) -> tuple[float, float]:
    def covered(src: np.ndarray, dst: np.ndarray) -> float:
        points = np.argwhere(src)
        targets = np.argwhere(dst)
        if len(points) == 0:
            return 1.0
        if len(targets) == 0:
            return 0.0
        hits = 0
        for p in points:
            if np.min(np.sum((targets - p) ** 2, axis=1)) <= radius * radius:
                hits += 1
        return hits / len(points)

    return covered(pred, gt), covered(gt, pred)


def _two_region_edges() -> tuple[np.ndarray, np.ndarray]:
    """Edge map with a vertical ridge and its one-pixel ground-truth boundary."""
    edges = np.full((16, 16), 0.05)
    edges[:, 7:9] = 0.95
    gt = np.zeros((16, 16), dtype=bool)
    gt[:, 7] = True
    return edges, gt


class TestBoundaryPR:
    """Tests for single-map boundary matching."""

    def test_identical_maps(self) -> None:
        """Test that a perfect prediction scores 1 everywhere."""
        gt = np.zeros((6, 6), dtype=bool)
        gt[2, 1:5] = True
        pr = boundary_pr(gt, gt, 2)
        assert pr.precision == 1.0
        assert pr.recall == 1.0
        assert pr.f1 == 1.0

    def test_empty_prediction(self) -> None:
        """Test the empty-prediction convention P = 1, R = 0."""
        gt = np.zeros((5, 5), dtype=bool)
        gt[1, 1] = True
        pr = boundary_pr(np.zeros_like(gt), gt, 2)
        assert pr.precision == 1.0
        assert pr.recall == 0.0
        assert pr.f1 == 0.0

    def test_slack_radius_boundary(self) -> None:
        """Test that a 2-px offset matches at radius 2 but not at radius 1."""
        pred = np.zeros((5, 5), dtype=bool)
        gt = np.zeros((5, 5), dtype=bool)
        pred[2, 2] = True
        gt[2, 4] = True
        assert boundary_pr(pred, gt, 2).f1 == 1.0
        miss = boundary_pr(pred, gt, 1)
        assert miss.precision == 0.0
        assert miss.recall == 0.0

    def test_matches_distance_oracle(self) -> None:
        """Test random maps up to 8x8 against exhaustive nearest-pixel distances."""
        rng = np.random.default_rng(42)
        for _ in range(60):
            h, w = rng.integers(1, 9, size=2)
            pred = rng.uniform(size=(h, w)) > 0.75
            gt = rng.uniform(size=(h, w)) > 0.75
            radius = int(rng.integers(0, 4))
            pr = boundary_pr(pred, gt, radius)
            precision, recall = _oracle(pred, gt, radius)
            assert pr.precision == pytest.approx(precision, abs=1e-12)
            assert pr.recall == pytest.approx(recall, abs=1e-12)

    def test_swap_exchanges_precision_and_recall(self) -> None:
        """Test symmetry under swapping prediction and ground truth."""
        rng = np.random.default_rng(8)
        a = rng.uniform(size=(10, 10)) > 0.8
        b = rng.uniform(size=(10, 10)) > 0.8
        forward = boundary_pr(a, b, 1)
        backward = boundary_pr(b, a, 1)
        assert forward.precision == backward.recall
        assert forward.recall == backward.precision

    def test_size_mismatch(self) -> None:
        """Test that differently sized maps raise ShapeError."""
        with pytest.raises(ShapeError):
            boundary_pr(np.zeros((4, 4)), np.zeros((4, 5)), 2)

    def test_f1_zero_when_both_zero(self) -> None:
        """Test the f1 convention for P + R = 0."""
        assert BoundaryPR(0.0, 0.0).f1 == 0.0
        assert BoundaryPR(0.5, 1.0).f1 == pytest.approx(2 / 3)


class TestPRCurve:
    """Tests for hierarchy PR curves."""

    def test_two_regions_found(self) -> None:
        """Test that the ridge is recovered at a middle threshold and lost at 1."""
        edges, gt = _two_region_edges()
        hierarchy = segment(edges, SegmentConfig(strengthen=StrengthenMode.OFF))
        curve = pr_curve(hierarchy, gt, [0.0, 0.5, 1.0], slack_radius=2)
        assert len(curve) == 3
        assert curve[1].recall == 1.0
        assert curve[1].precision == 1.0
        assert curve[2].recall == 0.0

    def test_recall_non_increasing(self) -> None:
        """Test that recall never grows with the threshold on random hierarchies."""
        rng = np.random.default_rng(1)
        for _ in range(5):
            edges = rng.uniform(size=(14, 14))
            gt = rng.uniform(size=(14, 14)) > 0.85
            hierarchy = segment(edges, SegmentConfig(strengthen=StrengthenMode.OFF))
            recalls = [pr.recall for pr in pr_curve(hierarchy, gt, np.linspace(0, 1, 11), 1)]
            assert all(b <= a + 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_default_thresholds(self) -> None:
        """Test 33 uniform thresholds by default."""
        edges, gt = _two_region_edges()
        hierarchy = segment(edges)
        curve = pr_curve(hierarchy, gt)
        assert len(curve) == 33
        assert curve[0].threshold == 0.0
        assert curve[-1].threshold == 1.0

    def test_gt_shape_checked(self) -> None:
        """Test that ground truth must match the hierarchy size."""
        edges, _ = _two_region_edges()
        hierarchy = segment(edges)
        with pytest.raises(ShapeError):
            pr_curve(hierarchy, np.zeros((8, 8), dtype=bool))


class TestOdsOis:
    """Tests for dataset summaries."""

    @staticmethod
    def _curve(counts: list[tuple[int, int, int, int]], thresholds: list[float]) -> list[BoundaryPR]:
        return [BoundaryPR.from_counts(*c, threshold=t) for c, t in zip(counts, thresholds, strict=True)]

    def test_single_image(self) -> None:
        """Test that ODS equals OIS equals the curve maximum for one image."""
        curve = self._curve([(10, 10, 2, 10), (8, 10, 8, 10), (5, 10, 10, 10)], [0.0, 0.5, 1.0])
        summary = ods_ois([curve])
        assert summary.ods == pytest.approx(0.8)
        assert summary.ois == pytest.approx(0.8)
        assert summary.ods_threshold == 0.5

    def test_enumeration_fixture(self) -> None:
        """Test two images with best thresholds 0.3 and 0.7 against enumeration."""
        thresholds = [0.0, 0.3, 0.7, 1.0]
        a = self._curve([(2, 10, 10, 10), (9, 10, 9, 10), (6, 10, 6, 10), (0, 0, 0, 10)], thresholds)
        b = self._curve([(1, 10, 10, 10), (5, 10, 5, 10), (8, 10, 8, 10), (0, 0, 0, 10)], thresholds)
        summary = ods_ois([a, b])

        pooled_f1 = []
        for pa, pb in zip(a, b, strict=True):
            n_pred = pa.pred_total + pb.pred_total
            p = 1.0 if n_pred == 0 else (pa.pred_matched + pb.pred_matched) / n_pred
            r =(pa.gt_matched + pb.gt_matched) / (pa.gt_total + pb.gt_total)
            pooled_f1.append(0.0 if p + r == 0 else 2 * p * r / (p + r))
        assert summary.ods == pytest.approx(max(pooled_f1))
        assert summary.ods == pytest.approx(0.7)
        assert summary.ods_threshold == 0.3
        assert summary.ois == pytest.approx(0.85)
        assert summary.ois >= summary.ods
        assert summary.curve[1].precision == pytest.approx(0.7)
        assert summary.curve[0].recall == pytest.approx(1.0)

    def test_large_image_outweighs_small_one(self) -> None:
        """Test that ODS pools pixel counts instead of averaging per-image f1."""
        thresholds = [0.0, 1.0]
        large = self._curve([(90, 100, 90, 100), (10, 100, 10, 100)], thresholds)
        small = self._curve([(2, 10, 2, 10), (9, 10, 9, 10)], thresholds)
        summary = ods_ois([large, small])

        mean_f1 = max((large[i].f1 + small[i].f1) / 2 for i in range(2))
        assert mean_f1 == pytest.approx(0.55)
        assert summary.ods == pytest.approx(92 / 110)
        assert summary.ods_threshold == 0.0
        assert summary.ois == pytest.approx(0.9)
        assert summary.curve[0].pred_total == 110

    def test_pooling_matches_joined_images(self) -> None:
        """Test that pooled counts equal matching both images side by side."""
        rng = np.random.default_rng(3)
        radius = 2
        pred_a, gt_a = rng.uniform(size=(20, 20)) > 0.9, rng.uniform(size=(20, 20)) > 0.9
        pred_b, gt_b = rng.uniform(size=(20, 7)) > 0.7, rng.uniform(size=(20, 7)) > 0.8
        gap = np.zeros((20, 2 * radius + 1), dtype=bool)

        summary = ods_ois([[boundary_pr(pred_a, gt_a, radius)], [boundary_pr(pred_b, gt_b, radius)]])
        joined = boundary_pr(np.hstack([pred_a, gap, pred_b]), np.hstack([gt_a, gap, gt_b]), radius)
        assert summary.curve[0].precision == pytest.approx(joined.precision)
        assert summary.curve[0].recall == pytest.approx(joined.recall)
        assert summary.ods == pytest.approx(joined.f1)

    def test_counts_validated(self) -> None:
        """Test that matched counts cannot exceed their totals."""
        with pytest.raises(ValueError):
            BoundaryPR.from_counts(5, 4, 0, 0)
        empty = BoundaryPR.from_counts(0, 0, 0, 0)
        assert (empty.precision, empty.recall) == (1.0, 1.0)

    def test_empty_input(self) -> None:
        """Test that no curves raise InputError."""
        with pytest.raises(InputError):
            ods_ois([])

    def test_mismatched_thresholds(self) -> None:
        """Test that curves must share thresholds."""
        a = self._curve([(1, 1, 1, 1)], [0.0])
        b = self._curve([(1, 1, 1, 1)], [0.5])
        with pytest.raises(InputError):
            ods_ois([a, b])


class TestBaselines:
    """Tests for the hand-designed fusion baselines."""

    @staticmethod
    def _step_scene() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        color = np.full((32, 32, 3), 60.0)
        color[:, 16:] = 200.0
        disparity = np.full((32, 32), 10.0)
        disparity[:, 16:] = 20.0
        normals = np.zeros((32, 32, 3))
        normals[:, :, 2] = 1.0
        return color, disparity, normals

    def test_data_agnostic_peaks_at_edge(self) -> None:
        """Test that clean channels respond most strongly at the true edge."""
        color, disparity, normals = self._step_scene()
        edges = baseline_fuse(BaselineMode.DATA_AGNOSTIC, color, disparity, normals).values
        row = edges[16]
        assert int(np.argmax(row)) in (15, 16)
        assert row[2] < 0.05
        assert edges.min() >= 0.0
        assert edges.max() <= 1.0

    def test_color_mode_sees_texture(self) -> None:
        """Test that color responds to texture that disparity does not show."""
        _, disparity, normals = self._step_scene()
        disparity[:] = 10.0
        color = np.full((32, 32, 3), 100.0)
        color[:, ::8] = 220.0
        color_edges = baseline_fuse(BaselineMode.COLOR, color, disparity, normals).values
        depth_edges = baseline_fuse(BaselineMode.DISPARITY, color, disparity, normals).values
        assert color_edges.max() > 0.5
        assert depth_edges.max() < 0.01

    def test_single_channel_modes(self) -> None:
        """Test that disparity and normals modes follow the analytic recipe."""
        color, disparity, normals = self._step_scene()
        disp_edges = baseline_fuse(BaselineMode.DISPARITY, color, disparity, normals).values
        normal_edges = baseline_fuse(BaselineMode.NORMALS, color, disparity, normals).values
        assert disp_edges.max() > 0.9
        assert disp_edges[:, :10].max() < 0.01
        assert normal_edges.max() < 0.01


class TestOutputs:
    """Tests for evaluation output and the end-to-end helper."""

    def test_csv_format(self) -> None:
        """Test the PR curve CSV layout."""
        text = format_curve([BoundaryPR(1.0, 0.5, 0.25)])
        lines = text.splitlines()
        assert lines[0] == "threshold,precision,recall,f1"
        assert lines[1] == "0.250000,1.000000,0.500000,0.666667"

    def test_summary_table_aligned(self) -> None:
        """Test one aligned row per method in order."""
        results = {
            "fused": OdsOis(0.81, 0.5, 0.84, ()),
            "data-agnostic": OdsOis(0.52, 0.25, 0.6, ()),
        }
        lines = format_summary(results).splitlines()
        assert lines[0].split() == ["method", "ODS", "OIS", "t*"]
        assert lines[1].split()[:3] == ["fused", "0.810", "0.840"]
        assert lines[2].startswith("data-agnostic")
        assert len({len(line) for line in lines}) == 1

    def test_gt_boundaries_are_thin(self) -> None:
        """Test that a thick ridge thins to a single line."""
        edges = np.zeros((12, 12))
        edges[:, 4:7] = 0.9
        gt = gt_boundaries(edges)
        assert np.all(gt[2:10, 4:7].sum(axis=1) == 1)
        assert not gt[:, :4].any()
        assert not gt_boundaries(np.zeros((4, 4))).any()

    def test_evaluate(self) -> None:
        """Test the dataset helper on two copies of the same image."""
        edges, _ = _two_region_edges()
        hierarchy = segment(edges, SegmentConfig(strengthen=StrengthenMode.OFF))
        summary = evaluate([hierarchy, hierarchy], [edges, edges], EvalConfig(thresholds=5))
        assert summary.ods == pytest.approx(summary.ois)
        assert summary.ods > 0.9
        assert len(summary.curve) == 5

    def test_evaluate_length_mismatch(self) -> None:
        """Test that hierarchies and ground truth must pair up."""
        edges, _ = _two_region_edges()
        hierarchy = segment(edges)
        with pytest.raises(InputError):
            evaluate([hierarchy], [edges, edges])
