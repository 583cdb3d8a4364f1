"""
Analytic depth-edge probabilities from clean disparity and normal maps.

Provides:
- The logistic squashing used for every edge probability
- Depth contour probability from the Laplacian of the disparity gradient magnitude
- Depth crease probability from normal-component gradients
- Noisy-or combination into a single depth-edge probability
- Normal reconstruction from disparity and camera intrinsics
- Discontinuity contours with uphill directions for refinement targets
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.special import expit

from edgefuse.imaging import (
    FilterKind,
    FilterSpec,
    ImageKind,
    MultiChannelImage,
    gaussian_kernel,
    gradient_planes,
    laplacian_plane,
)
from edgefuse.utils.errors import InputError, ShapeError
from edgefuse.utils.formats import atomic_write_text, write_pfm
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 0.5


class EdgeKind(Enum):
    """Which edge quantity an EdgeProbabilityMap holds."""

    CONTOUR = "contour"
    CREASE = "crease"
    EDGE = "edge"
    NETWORK = "network"


@dataclass(frozen=True, eq=False)
class EdgeProbabilityMap:
    """Single-channel probability raster tagged with its edge kind."""

    image: MultiChannelImage
    kind: EdgeKind

    def __post_init__(self) -> None:
        if self.image.channels != 1:
            raise ShapeError(f"edge map must be single-channel, got {self.image.channels}")
        if self.image.kind is not ImageKind.PROBABILITY:
            object.__setattr__(self, "image", MultiChannelImage(self.image.data, ImageKind.PROBABILITY))

    @classmethod
    def from_array(cls, values: np.ndarray, kind: EdgeKind) -> EdgeProbabilityMap:
        """Wrap a 2-D array, clipping rounding spill to [0, 1]."""
        return cls(MultiChannelImage(np.clip(values, 0.0, 1.0), ImageKind.PROBABILITY), kind)

    @property
    def values(self) -> np.ndarray:
        """Probabilities as a float64 (height, width) array."""
        return self.image.plane(0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape


@dataclass(frozen=True)
class LogisticParams:
    """Center and sharpness of the edge logistic."""

    center: float
    sharpness: float = 10.0

    def __post_init__(self) -> None:
        if self.center <= 0:
            raise ValueError(f"logistic center must be > 0, got {self.center}")


@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Pinhole camera for disparity-to-depth conversion.

    Attributes:
        focal: Focal length in pixels
        cx: Principal point column
        cy: Principal point row
        baseline_focal: Product of baseline and focal length (depth = baseline_focal / disparity)
        disparity_offset: Added to stored disparities before conversion
    """

    focal: float
    cx: float
    cy: float
    baseline_focal: float
    disparity_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.focal <= 0:
            raise ValueError(f"focal length must be > 0, got {self.focal}")
        if self.baseline_focal <= 0:
            raise ValueError(f"baseline_focal must be > 0, got {self.baseline_focal}")

    @classmethod
    def for_canvas(cls, width: int, height: int, baseline_focal: float = 60.0) -> CameraIntrinsics:
        """Camera with focal length equal to the canvas width, centered principal point."""
        return cls(focal=float(width), cx=(width - 1) / 2.0, cy=(height - 1) / 2.0, baseline_focal=baseline_focal)


@dataclass(frozen=True)
class GroundTruthConfig:
    """Knobs of the ground-truth recipe (`gt.*` in a run config)."""

    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    contour_filter: FilterKind = FilterKind.CENTRAL_DIFFERENCE
    dog_sigma1: float = 1.5
    dog_sigma2: float = 2.4
    median_radius: int = 7
    jump: float = 1.0

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be > 0")
        if self.contour_filter not in (FilterKind.CENTRAL_DIFFERENCE, FilterKind.DERIVATIVE_OF_GAUSSIAN):
            raise ValueError(f"contour filter must be a gradient filter, got {self.contour_filter.value}")
        if self.median_radius < 0:
            raise ValueError("median_radius must be >= 0")
        if self.jump <= 0:
            raise ValueError("jump must be > 0")

    @property
    def contour_spec(self) -> FilterSpec:
        if self.contour_filter is FilterKind.CENTRAL_DIFFERENCE:
            return FilterSpec.central_difference()
        return FilterSpec(FilterKind.DERIVATIVE_OF_GAUSSIAN, sigma=self.dog_sigma1, sigma2=self.dog_sigma2)


@dataclass(frozen=True)
class GroundTruth:
    """Contour, crease and combined edge probabilities of one scene."""

    contour: EdgeProbabilityMap
    crease: EdgeProbabilityMap
    edge: EdgeProbabilityMap
    config: GroundTruthConfig

    def write(self, out_dir: str | Path) -> list[Path]:
        """
        Write contour.pfm, crease.pfm, edges.pfm and a gt.txt sidecar.

        Returns:
            list[Path]: Files written
        """
        out = Path(out_dir)
        cfg = self.config
        sidecar = (
            f"alpha = {cfg.alpha!r}\n"
            f"beta = {cfg.beta!r}\n"
            f"filter = {cfg.contour_filter.value}\n"
            f"dog_sigmas = {cfg.dog_sigma1!r}, {cfg.dog_sigma2!r}\n"
            f"median_radius = {cfg.median_radius}\n"
        )
        written = [
            write_pfm(out / "contour.pfm", self.contour.image),
            write_pfm(out / "crease.pfm", self.crease.image),
            write_pfm(out / "edges.pfm", self.edge.image),
            atomic_write_text(out / "gt.txt", sidecar),
        ]
        logger.info("Wrote ground truth to %s", out)
        return written


def logistic(x: float | np.ndarray, params: LogisticParams) -> float | np.ndarray:
    """
    Edge logistic 1 / (1 + exp(-sharpness * (x / center - 1))).

    Returns exactly 0.5 at x = center.
    """
    z = params.sharpness * (np.asarray(x, dtype=np.float64) / params.center - 1.0)
    result = expit(z)
    return float(result) if np.ndim(result) == 0 else result


def _plane(img: MultiChannelImage | np.ndarray) -> np.ndarray:
    if isinstance(img, MultiChannelImage):
        if img.channels != 1:
            raise ShapeError(f"expected a single-channel image, got {img.channels} channels")
        return img.plane(0)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {arr.shape}")
    return arr


def contour_response(disparity: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """
    Laplacian of the disparity gradient magnitude.

    The disparity is first extended by odd reflection so that planar
    disparity stays exactly linear across the image border. With a
    derivative-of-Gaussian spec the Laplacian is estimated by the
    difference of Gaussians (spec.sigma, spec.sigma2), scaled to unit gain.
    """
    if spec.kind is FilterKind.CENTRAL_DIFFERENCE:
        margin = 3
    elif spec.kind is FilterKind.DERIVATIVE_OF_GAUSSIAN:
        margin = _kernel_radius(spec.sigma) + _kernel_radius(spec.sigma2) + 2
    else:
        raise ValueError(f"contour response needs a gradient filter, got {spec.kind.value}")

    padded = np.pad(disparity, margin, mode="reflect", reflect_type="odd")
    gx, gy = gradient_planes(padded, spec)
    magnitude = np.hypot(gx, gy)

    if spec.kind is FilterKind.CENTRAL_DIFFERENCE:
        response = laplacian_plane(magnitude)
    else:
        narrow = _gaussian_smooth(magnitude, spec.sigma)
        wide = _gaussian_smooth(magnitude, spec.sigma2)
        response = (wide - narrow) * (2.0 / (spec.sigma2**2 - spec.sigma**2))
    return response[margin:-margin, margin:-margin]


def _kernel_radius(sigma: float) -> int:
    return len(gaussian_kernel(sigma)) // 2


def _gaussian_smooth(plane: np.ndarray, sigma: float) -> np.ndarray:
    g = gaussian_kernel(sigma)
    return ndimage.correlate1d(ndimage.correlate1d(plane, g, axis=0, mode="nearest"), g, axis=1, mode="nearest")


def depth_contour_prob(
    disparity: MultiChannelImage | np.ndarray,
    alpha: float = DEFAULT_ALPHA,
    spec: FilterSpec | None = None,
) -> EdgeProbabilityMap:
    """
    Probability of a depth contour at each pixel.

    Args:
        disparity: Single-channel disparity
        alpha: Logistic center
        spec: Central difference (default) or derivative-of-Gaussian

    Returns:
        EdgeProbabilityMap: logistic of the positive part of the Laplacian
            of the disparity gradient magnitude

    Raises:
        InputError: If the disparity contains NaN or Inf
    """
    plane = _plane(disparity)
    bad = ~np.isfinite(plane)
    if bad.any():
        raise InputError(f"disparity has {int(bad.sum())} non-finite pixels; inpaint or mask them first")
    response = contour_response(plane, spec or FilterSpec.central_difference())
    prob = logistic(np.maximum(response, 0.0), LogisticParams(alpha))
    return EdgeProbabilityMap.from_array(np.asarray(prob), EdgeKind.CONTOUR)


def masked_central_gradient(plane: np.ndarray, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Central differences that shrink to one-sided differences next to undefined pixels.

    Undefined pixels get a zero gradient. With every pixel valid this equals
    the replicated-border central difference.
    """
    values = np.where(valid, plane, 0.0)
    p = np.pad(values, 1, mode="edge")
    m = np.pad(valid, 1, mode="edge")
    center = p[1:-1, 1:-1]

    def along(prev: np.ndarray, prev_ok: np.ndarray, nxt: np.ndarray, nxt_ok: np.ndarray) -> np.ndarray:
        fwd_ok = valid & nxt_ok
        bwd_ok = valid & prev_ok
        fwd = nxt - center
        bwd = center - prev
        one_sided = np.where(fwd_ok, fwd, np.where(bwd_ok, bwd, 0.0))
        return np.where(fwd_ok & bwd_ok, 0.5 * (fwd + bwd), one_sided)

    gx = along(p[1:-1, :-2], m[1:-1, :-2], p[1:-1, 2:], m[1:-1, 2:])
    gy = along(p[:-2, 1:-1], m[:-2, 1:-1], p[2:, 1:-1], m[2:, 1:-1])
    return gx, gy


def depth_crease_prob(normals: MultiChannelImage | np.ndarray, beta: float = DEFAULT_BETA) -> EdgeProbabilityMap:
    """
    Probability of a depth crease from the summed gradient magnitudes of the normal components.

    All-zero normals mark undefined pixels; they are left out of every
    stencil. Non-unit normals are renormalized with a warning.
    """
    arr = np.array(normals.data if isinstance(normals, MultiChannelImage) else normals, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"normals need shape (height, width, 3), got {arr.shape}")

    finite = np.all(np.isfinite(arr), axis=2)
    arr[~finite] = 0.0
    norms = np.linalg.norm(arr, axis=2)
    defined = norms > 0
    off_unit = defined & (np.abs(norms - 1.0) > 1e-3)
    if off_unit.any():
        logger.warning("Renormalizing %d non-unit normals before crease detection", int(off_unit.sum()))
    arr = np.divide(arr, norms[:, :, None], out=np.zeros_like(arr), where=defined[:, :, None])

    total = np.zeros(arr.shape[:2])
    for k in range(3):
        gx, gy = masked_central_gradient(arr[:, :, k], defined)
        total += np.hypot(gx, gy)
    prob = logistic(total, LogisticParams(beta))
    return EdgeProbabilityMap.from_array(np.asarray(prob), EdgeKind.CREASE)


def combine_edge_prob(contour: EdgeProbabilityMap, crease: EdgeProbabilityMap) -> EdgeProbabilityMap:
    """Noisy-or of contour and crease probabilities."""
    if contour.shape != crease.shape:
        raise ShapeError(f"contour {contour.shape} and crease {crease.shape} maps differ in size")
    combined = 1.0 - (1.0 - contour.values) * (1.0 - crease.values)
    return EdgeProbabilityMap.from_array(combined, EdgeKind.EDGE)


def _fill_from_nearest(values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    if valid.all():
        return values
    indices = ndimage.distance_transform_edt(~valid, return_distances=False, return_indices=True)
    return values[tuple(indices)]


def normals_from_disparity(
    disparity: MultiChannelImage | np.ndarray,
    camera: CameraIntrinsics,
    median_radius: int = 7,
) -> MultiChannelImage:
    """
    Reconstruct camera-facing unit normals from disparity.

    Depth is median filtered before reconstructing the point cloud and the
    normal field is median filtered again afterwards. Normals are crosses of
    the image-axis tangents of the point cloud, expressed with x right, y up
    and z toward the camera. Pixels with nonpositive or non-finite disparity
    are undefined and come back as zero vectors.
    """
    disp = _plane(disparity) + camera.disparity_offset
    valid = np.isfinite(disp) & (disp > 0)
    if not valid.any():
        raise InputError("disparity has no positive pixels")

    depth = np.zeros_like(disp)
    depth[valid] = camera.baseline_focal / disp[valid]
    if median_radius > 0:
        depth = ndimage.median_filter(_fill_from_nearest(depth, valid), size=2 * median_radius + 1, mode="nearest")

    height, width = disp.shape
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    points = np.stack([(u - camera.cx) * depth / camera.focal, (v - camera.cy) * depth / camera.focal, depth], axis=2)

    tangent_u = np.empty_like(points)
    tangent_v = np.empty_like(points)
    for k in range(3):
        tangent_u[:, :, k], tangent_v[:, :, k] = masked_central_gradient(points[:, :, k], valid)
    normal = np.cross(tangent_u, tangent_v)

    # Face the camera: the normal must point back toward the origin
    facing_away = np.sum(normal * points, axis=2) > 0
    normal[facing_away] *= -1.0
    normal = normal * np.array([1.0, -1.0, -1.0])

    normal = _normalize(normal, valid)
    if median_radius > 0:
        filled = np.stack([_fill_from_nearest(normal[:, :, k], valid) for k in range(3)], axis=2)
        smoothed = np.stack(
            [ndimage.median_filter(filled[:, :, k], size=2 * median_radius + 1, mode="nearest") for k in range(3)],
            axis=2,
        )
        normal = _normalize(smoothed, valid)

    undefined = int((~valid).sum())
    if undefined:
        logger.debug("normals_from_disparity: %d undefined pixels", undefined)
    return MultiChannelImage(normal, ImageKind.NORMALS)


def _normalize(vectors: np.ndarray, valid: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=2, keepdims=True)
    keep = valid[:, :, None] & (norms > 0)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=keep)


def make_ground_truth(
    disparity: MultiChannelImage | np.ndarray,
    normals: MultiChannelImage | np.ndarray | None = None,
    camera: CameraIntrinsics | None = None,
    config: GroundTruthConfig | None = None,
) -> GroundTruth:
    """
    Build contour, crease and edge probabilities for one clean scene.

    Args:
        disparity: Clean disparity
        normals: Clean normals; reconstructed from disparity when absent
        camera: Intrinsics, required when normals are absent
        config: Recipe knobs; defaults to alpha 1, beta 0.5

    Returns:
        GroundTruth: The three probability maps
    """
    cfg = config or GroundTruthConfig()
    if normals is None:
        if camera is None:
            raise ValueError("make_ground_truth needs normals or camera intrinsics")
        normals = normals_from_disparity(disparity, camera, cfg.median_radius)

    contour = depth_contour_prob(disparity, cfg.alpha, cfg.contour_spec)
    crease = depth_crease_prob(normals, cfg.beta)
    edge = combine_edge_prob(contour, crease)
    return GroundTruth(contour=contour, crease=crease, edge=edge, config=cfg)


def discontinuity_contours(
    disparity: MultiChannelImage | np.ndarray, jump: float = 1.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Pixels whose forward difference crosses a disparity discontinuity.

    A pixel is a contour when its right or lower neighbor differs by more
    than `jump`. The direction is the normalized forward-difference gradient
    there, pointing toward larger disparity; it is zero elsewhere.

    Returns:
        tuple: (contour mask, du, dv) as (height, width) arrays
    """
    d = _plane(disparity)
    fu = np.zeros_like(d)
    fv = np.zeros_like(d)
    fu[:, :-1] = d[:, 1:] - d[:, :-1]
    fv[:-1, :] = d[1:, :] - d[:-1, :]
    mask = (np.abs(fu) > jump) | (np.abs(fv) > jump)
    magnitude = np.hypot(fu, fv)
    du = np.divide(fu, magnitude, out=np.zeros_like(fu), where=mask)
    dv = np.divide(fv, magnitude, out=np.zeros_like(fv), where=mask)
    return mask, du, dv
