"""
Boundary evaluation of segmentation hierarchies.

Provides:
- Boundary precision/recall with a slack radius
- PR curves over hierarchy thresholds and ODS/OIS summaries
- Hand-designed fusion baselines to compare the trained network against
- CSV curves and an aligned summary table
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.morphology import disk, thin

from edgefuse.ground_truth import (
    EdgeKind,
    EdgeProbabilityMap,
    GroundTruthConfig,
    combine_edge_prob,
    depth_contour_prob,
    depth_crease_prob,
)
from edgefuse.imaging import FilterSpec, MultiChannelImage, gradient_planes
from edgefuse.segmenter import SegmentationHierarchy, boundary_map, threshold_segmentation
from edgefuse.utils.errors import InputError, ShapeError
from edgefuse.utils.formats import atomic_write_text
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class EvalConfig:
    """
    Evaluation knobs (`eval.*` in a run config).

    Attributes:
        slack_radius: Matching tolerance in pixels
        thresholds: Number of uniform hierarchy thresholds in [0, 1]
        gt_threshold: Edge probability above which a ground-truth pixel is a boundary
        thin_gt: Thin ground-truth boundaries to one pixel before matching
        baseline_sigma: Gaussian scale of the data-agnostic baseline's derivative kernels
    """

    slack_radius: int = 2
    thresholds: int = 33
    gt_threshold: float = 0.5
    thin_gt: bool = True
    baseline_sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.slack_radius < 0:
            raise ValueError("slack_radius must be >= 0")
        if self.thresholds < 1:
            raise ValueError("thresholds must be >= 1")
        if not 0.0 <= self.gt_threshold < 1.0:
            raise ValueError("gt_threshold must lie in [0, 1)")
        if self.baseline_sigma <= 0:
            raise ValueError("baseline_sigma must be > 0")

    @property
    def threshold_values(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.thresholds)


def _ratio(hits: int, total: int) -> float:
    # An empty side scores perfectly on the ratio it is the denominator of
    return 1.0 if total == 0 else hits / total


@dataclass(frozen=True)
class BoundaryPR:
    """
    Precision and recall at one threshold, with the pixel counts behind them.

    Counts stay zero for entries built from ratios alone; dataset summaries
    need them to pool images.
    """

    precision: float
    recall: float
    threshold: float = 0.0
    slack_radius: int = 2
    pred_matched: int = 0
    pred_total: int = 0
    gt_matched: int = 0
    gt_total: int = 0

    @classmethod
    def from_counts(
        cls,
        pred_matched: int,
        pred_total: int,
        gt_matched: int,
        gt_total: int,
        threshold: float = 0.0,
        slack_radius: int = 2,
    ) -> BoundaryPR:
        if not (0 <= pred_matched <= pred_total and 0 <= gt_matched <= gt_total):
            raise ValueError("matched counts must lie between 0 and their totals")
        return cls(
            precision=_ratio(pred_matched, pred_total),
            recall=_ratio(gt_matched, gt_total),
            threshold=threshold,
            slack_radius=slack_radius,
            pred_matched=pred_matched,
            pred_total=pred_total,
            gt_matched=gt_matched,
            gt_total=gt_total,
        )

    @property
    def f1(self) -> float:
        total = self.precision + self.recall
        return 0.0 if total <= 0 else 2.0 * self.precision * self.recall / total


def _binary(name: str, arr: np.ndarray) -> np.ndarray:
    b = np.asarray(arr)
    if b.ndim == 3 and b.shape[2] == 1:
        b = b[:, :, 0]
    if b.ndim != 2:
        raise ShapeError(f"{name} boundary map must be 2-D, got shape {b.shape}")
    return b.astype(bool)


def _within(mask: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0 or not mask.any():
        return mask
    return ndimage.binary_dilation(mask, structure=disk(radius))


def boundary_pr(pred: np.ndarray, gt: np.ndarray, slack_radius: int = 2, threshold: float = 0.0) -> BoundaryPR:
    """
    Match boundary pixels with a disc-shaped tolerance.

    Precision is the fraction of predicted pixels within `slack_radius` of a
    ground-truth pixel; recall is the fraction of ground-truth pixels within
    `slack_radius` of a prediction. An empty side contributes a perfect score
    to the ratio it is the denominator of.

    Raises:
        ShapeError: If the maps differ in size
    """
    p = _binary("predicted", pred)
    g = _binary("ground-truth", gt)
    if p.shape != g.shape:
        raise ShapeError(f"boundary maps differ in size: predicted {p.shape}, ground truth {g.shape}")
    if slack_radius < 0:
        raise ValueError(f"slack_radius must be >= 0, got {slack_radius}")

    return BoundaryPR.from_counts(
        pred_matched=int((p & _within(g, slack_radius)).sum()),
        pred_total=int(p.sum()),
        gt_matched=int((g & _within(p, slack_radius)).sum()),
        gt_total=int(g.sum()),
        threshold=threshold,
        slack_radius=slack_radius,
    )


def gt_boundaries(edge_prob: np.ndarray, threshold: float = 0.5, thin_lines: bool = True) -> np.ndarray:
    """Binary ground-truth boundary map from an edge probability map."""
    p = np.asarray(edge_prob, dtype=np.float64)
    if p.ndim == 3 and p.shape[2] == 1:
        p = p[:, :, 0]
    mask = p > threshold
    return thin(mask) if thin_lines and mask.any() else mask


def pr_curve(
    hierarchy: SegmentationHierarchy,
    gt: np.ndarray,
    thresholds: Sequence[float] | np.ndarray | None = None,
    slack_radius: int = 2,
) -> list[BoundaryPR]:
    """
    Boundary precision/recall of the hierarchy's partition at each threshold.

    Args:
        hierarchy: Segmentation hierarchy
        gt: (H, W) binary ground-truth boundaries
        thresholds: Hierarchy thresholds; 33 uniform values in [0, 1] by default
        slack_radius: Matching tolerance in pixels

    Returns:
        list[BoundaryPR]: One entry per threshold, in the given order
    """
    ts = np.linspace(0.0, 1.0, 33) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    gt_map = _binary("ground-truth", gt)
    if gt_map.shape != hierarchy.shape:
        raise ShapeError(f"ground truth {gt_map.shape} does not match hierarchy {hierarchy.shape}")
    curve = []
    for t in ts:
        pred = boundary_map(threshold_segmentation(hierarchy, float(t)))
        curve.append(boundary_pr(pred, gt_map, slack_radius, float(t)))
    return curve


@dataclass(frozen=True)
class OdsOis:
    """Dataset summary; `curve` holds precision and recall pooled over images."""

    ods: float
    ods_threshold: float
    ois: float
    curve: tuple[BoundaryPR, ...]


def ods_ois(curves: Sequence[Sequence[BoundaryPR]]) -> OdsOis:
    """
    Summarize per-image PR curves sampled at shared thresholds.

    At each threshold the matched, predicted and ground-truth pixel counts
    are summed over images and f1 is taken from the pooled precision and
    recall; ODS is the best of these. OIS is the mean of each image's best
    f1. Ties go to the lower threshold.

    Raises:
        InputError: If there are no curves or they disagree in thresholds
    """
    if not curves or not curves[0]:
        raise InputError("ods_ois needs at least one non-empty PR curve")
    thresholds = [pr.threshold for pr in curves[0]]
    for curve in curves[1:]:
        if [pr.threshold for pr in curve] != thresholds:
            raise InputError("PR curves were sampled at different thresholds")

    counts = np.array(
        [[(pr.pred_matched, pr.pred_total, pr.gt_matched, pr.gt_total) for pr in curve] for curve in curves],
        dtype=np.int64,
    ).sum(axis=0)
    radius = curves[0][0].slack_radius
    pooled = tuple(
        BoundaryPR.from_counts(*(int(c) for c in row), threshold=t, slack_radius=radius)
        for row, t in zip(counts, thresholds, strict=True)
    )
    pooled_f1 = np.array([pr.f1 for pr in pooled])
    best = int(np.argmax(pooled_f1))

    per_image_f1 = np.array([[pr.f1 for pr in curve] for curve in curves])
    return OdsOis(
        ods=float(pooled_f1[best]),
        ods_threshold=float(thresholds[best]),
        ois=float(per_image_f1.max(axis=1).mean()),
        curve=pooled,
    )


# --- Baselines ---


class BaselineMode(Enum):
    """Hand-designed edge detectors the trained fusion is compared against."""

    COLOR = "color"
    DISPARITY = "disparity"
    NORMALS = "normals"
    DATA_AGNOSTIC = "data-agnostic"


def _normalized(response: np.ndarray, percentile: float = 99.0) -> np.ndarray:
    scale = float(np.percentile(response, percentile))
    if scale <= 0:
        # Sparse responses: fall back to the peak
        scale = float(response.max())
    if scale <= 0:
        return np.zeros_like(response)
    return np.clip(response / scale, 0.0, 1.0)


def _gradient_norm(plane: np.ndarray, spec: FilterSpec) -> np.ndarray:
    gx, gy = gradient_planes(plane, spec)
    return np.hypot(gx, gy)


def _luminance(color: MultiChannelImage | np.ndarray) -> np.ndarray:
    rgb = np.asarray(color.data if isinstance(color, MultiChannelImage) else color, dtype=np.float64)
    return (rgb @ _LUMA) / 255.0


def _array(img: MultiChannelImage | np.ndarray) -> np.ndarray:
    return np.asarray(img.data if isinstance(img, MultiChannelImage) else img, dtype=np.float64)


def baseline_fuse(
    mode: BaselineMode,
    color: MultiChannelImage | np.ndarray,
    disparity: MultiChannelImage | np.ndarray,
    normals: MultiChannelImage | np.ndarray,
    gt_config: GroundTruthConfig | None = None,
    sigma: float = 2.0,
) -> EdgeProbabilityMap:
    """
    Edge probabilities from fixed rules instead of a trained network.

    Single-channel modes apply the analytic edge recipe to one estimate:
    contour probability for disparity, crease probability for normals and a
    normalized luminance gradient for color. The data-agnostic mode averages
    large-kernel gradient magnitudes of every channel, each normalized by its
    99th percentile.

    Args:
        mode: Which baseline
        color: (H, W, 3) color in [0, 255]
        disparity: (H, W) or (H, W, 1) disparity estimate
        normals: (H, W, 3) normal estimate
        gt_config: Recipe knobs for the single-channel disparity and normals modes
        sigma: Derivative-of-Gaussian scale for the color and data-agnostic modes

    Returns:
        EdgeProbabilityMap: Values in [0, 1]
    """
    cfg = gt_config or GroundTruthConfig()
    disp = _array(disparity)
    if disp.ndim == 3:
        disp = disp[:, :, 0]
    spec = FilterSpec.derivative_of_gaussian(sigma)

    if mode is BaselineMode.DISPARITY:
        return depth_contour_prob(disp, cfg.alpha, cfg.contour_spec)
    if mode is BaselineMode.NORMALS:
        return depth_crease_prob(normals, cfg.beta)
    if mode is BaselineMode.COLOR:
        return EdgeProbabilityMap.from_array(_normalized(_gradient_norm(_luminance(color), spec)), EdgeKind.EDGE)

    normal_arr = _array(normals)
    responses = [
        _normalized(_gradient_norm(_luminance(color), spec)),
        _normalized(_gradient_norm(disp, spec)),
        _normalized(sum(_gradient_norm(normal_arr[:, :, k], spec) for k in range(3))),
    ]
    return EdgeProbabilityMap.from_array(np.mean(responses, axis=0), EdgeKind.EDGE)


def analytic_edges(
    disparity: MultiChannelImage | np.ndarray,
    normals: MultiChannelImage | np.ndarray,
    gt_config: GroundTruthConfig | None = None,
) -> EdgeProbabilityMap:
    """Noisy-or of contour and crease probabilities computed on estimates."""
    cfg = gt_config or GroundTruthConfig()
    contour = depth_contour_prob(disparity, cfg.alpha, cfg.contour_spec)
    return combine_edge_prob(contour, depth_crease_prob(normals, cfg.beta))


# --- Output ---


def format_curve(curve: Sequence[BoundaryPR]) -> str:
    lines = ["threshold,precision,recall,f1"]
    lines += [f"{pr.threshold:.6f},{pr.precision:.6f},{pr.recall:.6f},{pr.f1:.6f}" for pr in curve]
    return "\n".join(lines) + "\n"


def write_curve(path: str | Path, curve: Sequence[BoundaryPR]) -> Path:
    return atomic_write_text(path, format_curve(curve))


def format_summary(results: dict[str, OdsOis]) -> str:
    """Aligned ODS/OIS table, one row per method in insertion order."""
    width = max([len("method"), *(len(name) for name in results)])
    lines = [f"{'method':<{width}}  {'ODS':>6}  {'OIS':>6}  {'t*':>6}"]
    for name, summary in results.items():
        lines.append(f"{name:<{width}}  {summary.ods:6.3f}  {summary.ois:6.3f}  {summary.ods_threshold:6.3f}")
    return "\n".join(lines) + "\n"


def evaluate(
    hierarchies: Sequence[SegmentationHierarchy],
    gt_edges: Sequence[np.ndarray],
    config: EvalConfig | None = None,
) -> OdsOis:
    """
    Evaluate one method over a set of images.

    Args:
        hierarchies: One hierarchy per image
        gt_edges: Ground-truth edge probabilities, aligned with `hierarchies`
        config: Evaluation knobs

    Returns:
        OdsOis: Dataset summary and mean PR curve
    """
    cfg = config or EvalConfig()
    if len(hierarchies) != len(gt_edges):
        raise InputError(f"{len(hierarchies)} hierarchies but {len(gt_edges)} ground-truth maps")
    curves = []
    for hierarchy, edges in zip(hierarchies, gt_edges, strict=True):
        gt = gt_boundaries(edges, cfg.gt_threshold, cfg.thin_gt)
        if not gt.any():
            logger.warning("Ground truth has no boundary pixels; recall is 1 at every threshold")
        curves.append(pr_curve(hierarchy, gt, cfg.threshold_values, cfg.slack_radius))
    summary = ods_ois(curves)
    logger.info("ODS %.3f at t=%.3f, OIS %.3f over %d images", summary.ods, summary.ods_threshold, summary.ois, len(curves))
    return summary
