"""
Masked squared-error loss and the texture-edge mask it is weighted with.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from edgefuse.imaging import FilterSpec, gradient_planes
from edgefuse.utils.errors import ShapeError

MASK_WEIGHT = 10.0
DEPTH_EDGE_THRESHOLD = 0.5
COLOR_EDGE_PERCENTILE = 90.0
DEPTH_EDGE_DILATION = 2

_LUMA = np.array([0.299, 0.587, 0.114])


def color_edges(color: np.ndarray, percentile: float = COLOR_EDGE_PERCENTILE) -> np.ndarray:
    """Pixels whose luminance gradient magnitude reaches the given per-image percentile."""
    rgb = np.asarray(color, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"color must be (height, width, 3), got {rgb.shape}")
    gx, gy = gradient_planes(rgb @ _LUMA, FilterSpec.central_difference())
    magnitude = np.hypot(gx, gy)
    threshold = np.percentile(magnitude, percentile)
    return (magnitude >= threshold) & (magnitude > 0)


def make_mask(
    color: np.ndarray,
    edge_prob: np.ndarray,
    weight: float = MASK_WEIGHT,
    edge_threshold: float = DEPTH_EDGE_THRESHOLD,
    percentile: float = COLOR_EDGE_PERCENTILE,
    dilation: int = DEPTH_EDGE_DILATION,
) -> np.ndarray:
    """
    Up-weight color edges that are not depth edges.

    A pixel gets `weight` when it is a color edge and lies farther than
    `dilation` pixels from any pixel with edge probability above
    `edge_threshold`; every other pixel gets 1.

    Args:
        color: (height, width, 3) color image
        edge_prob: (height, width) ground-truth depth-edge probability
        weight: Mask value at texture edges
        edge_threshold: Probability above which a pixel counts as depth edge
        percentile: Color-edge gradient percentile
        dilation: Tolerance around depth edges in pixels

    Returns:
        np.ndarray: (height, width) float64 mask with values in {1, weight}

    Raises:
        ShapeError: If the images are not aligned
    """
    edges = np.asarray(edge_prob, dtype=np.float64)
    if edges.ndim == 3 and edges.shape[2] == 1:
        edges = edges[:, :, 0]
    if edges.shape != np.asarray(color).shape[:2]:
        raise ShapeError(f"mask inputs disagree: color {np.asarray(color).shape[:2]}, edges {edges.shape}")

    depth = edges > edge_threshold
    if dilation > 0 and depth.any():
        depth = ndimage.binary_dilation(depth, iterations=dilation)
    texture = color_edges(color, percentile) & ~depth
    return np.where(texture, weight, 1.0)


def _check_aligned(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> None:
    if pred.shape != target.shape or pred.shape != mask.shape:
        raise ShapeError(f"loss inputs disagree: prediction {pred.shape}, target {target.shape}, mask {mask.shape}")


def masked_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """Mean over all elements of (mask * (pred - target))^2."""
    p, t, m = (np.asarray(a, dtype=np.float64) for a in (pred, target, mask))
    _check_aligned(p, t, m)
    weighted = m * (p - t)
    return float(np.sum(weighted * weighted) / weighted.size)


def masked_loss_grad(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gradient of masked_loss with respect to the prediction."""
    p, t, m = (np.asarray(a, dtype=np.float64) for a in (pred, target, mask))
    _check_aligned(p, t, m)
    return 2.0 * m * m * (p - t) / p.size
