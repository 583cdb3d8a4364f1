"""
Dense raster type and the discrete operators every other module builds on.

Images are stored as (height, width, channels) float32 arrays, channel
interleaved and row-major. Operators accumulate in float64 and store the
result back as float32. Borders are handled by edge replication.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage
from skimage.transform import resize

from edgefuse.utils.errors import ShapeError
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

NORMAL_TOLERANCE = 1e-3

_LAPLACIAN_STENCIL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
_CENTRAL_DIFFERENCE = np.array([-0.5, 0.0, 0.5])


class ImageKind(Enum):
    """What the samples of an image mean; drives validation."""

    GENERIC = "generic"
    COLOR = "color"
    DISPARITY = "disparity"
    NORMALS = "normals"
    PROBABILITY = "probability"


@dataclass(frozen=True, eq=False)
class MultiChannelImage:
    """
    Immutable width x height x channels float raster.

    Attributes:
        data: Read-only float32 array of shape (height, width, channels)
        kind: Sample semantics; probability images are checked to lie in
            [0, 1] and normal images to be unit length where defined
            (all-zero pixels mark undefined normals)
    """

    data: np.ndarray
    kind: ImageKind = ImageKind.GENERIC

    def __post_init__(self) -> None:
        """Copy, validate and freeze the sample array."""
        arr = np.array(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeError(f"image data must be (height, width, channels), got shape {arr.shape}")

        if self.kind is ImageKind.PROBABILITY:
            if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError("probability image has samples outside [0, 1]")
        elif self.kind is ImageKind.NORMALS:
            if arr.shape[2] != 3:
                raise ShapeError(f"normal image needs 3 channels, got {arr.shape[2]}")
            norms = np.linalg.norm(arr.astype(np.float64), axis=2)
            defined = norms > 0
            if np.any(np.abs(norms[defined] - 1.0) > NORMAL_TOLERANCE):
                raise ValueError("normal image has non-unit vectors")

        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        """Spatial shape as (height, width)."""
        return self.height, self.width

    def plane(self, channel: int = 0) -> np.ndarray:
        """Return one channel as a writable float64 (height, width) array."""
        return self.data[:, :, channel].astype(np.float64)

    def channel(self, channel: int) -> MultiChannelImage:
        """Return one channel as a single-channel image."""
        return MultiChannelImage(self.data[:, :, channel : channel + 1])

    @classmethod
    def from_planes(cls, planes: list[np.ndarray], kind: ImageKind = ImageKind.GENERIC) -> MultiChannelImage:
        """Stack same-sized 2-D planes into one image."""
        return cls(np.stack(planes, axis=2), kind)


class FilterKind(Enum):
    """Discrete filters available to gradient() and filter_image()."""

    CENTRAL_DIFFERENCE = "central-difference"
    DERIVATIVE_OF_GAUSSIAN = "derivative-of-gaussian"
    DIFFERENCE_OF_GAUSSIANS = "difference-of-gaussians"
    GAUSSIAN = "gaussian"
    LAPLACIAN_5PT = "laplacian-5pt"
    MEDIAN = "median"


_SMOOTH_KINDS = {
    FilterKind.DERIVATIVE_OF_GAUSSIAN,
    FilterKind.DIFFERENCE_OF_GAUSSIANS,
    FilterKind.GAUSSIAN,
}


@dataclass(frozen=True)
class FilterSpec:
    """
    Filter selection plus its size parameters.

    Attributes:
        kind: Which filter to apply
        sigma: Gaussian sigma in pixels (first sigma for difference-of-Gaussians)
        sigma2: Second, wider sigma for difference-of-Gaussians
        radius: Half-size of the square median window
    """

    kind: FilterKind
    sigma: float = 1.5
    sigma2: float = 2.4
    radius: int = 7

    def __post_init__(self) -> None:
        if self.kind in _SMOOTH_KINDS and self.sigma <= 0:
            raise ValueError(f"{self.kind.value} needs sigma > 0, got {self.sigma}")
        if self.kind is FilterKind.DIFFERENCE_OF_GAUSSIANS and self.sigma2 <= self.sigma:
            raise ValueError(f"difference-of-gaussians needs sigma2 > sigma, got {self.sigma2} <= {self.sigma}")
        if self.kind is FilterKind.MEDIAN and self.radius < 1:
            raise ValueError(f"median radius must be >= 1, got {self.radius}")

    @classmethod
    def central_difference(cls) -> FilterSpec:
        return cls(FilterKind.CENTRAL_DIFFERENCE)

    @classmethod
    def derivative_of_gaussian(cls, sigma: float = 1.5) -> FilterSpec:
        return cls(FilterKind.DERIVATIVE_OF_GAUSSIAN, sigma=sigma)

    @classmethod
    def difference_of_gaussians(cls, sigma: float = 1.5, sigma2: float = 2.4) -> FilterSpec:
        return cls(FilterKind.DIFFERENCE_OF_GAUSSIANS, sigma=sigma, sigma2=sigma2)

    @classmethod
    def gaussian(cls, sigma: float) -> FilterSpec:
        return cls(FilterKind.GAUSSIAN, sigma=sigma)

    @classmethod
    def median(cls, radius: int = 7) -> FilterSpec:
        return cls(FilterKind.MEDIAN, radius=radius)


def gaussian_kernel(sigma: float, order: int = 0, truncate: float = 4.0) -> np.ndarray:
    """
    Build 1-D correlation weights for Gaussian smoothing or differentiation.

    The order-0 kernel sums to one. The order-1 kernel is the sampled
    derivative of the Gaussian, normalized so that correlating it with a
    unit-slope ramp returns exactly the slope.

    Args:
        sigma: Standard deviation in pixels
        order: 0 for smoothing, 1 for the first derivative
        truncate: Kernel half-width in units of sigma

    Returns:
        np.ndarray: Odd-length float64 weights centered on the middle tap
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = max(1, int(truncate * sigma + 0.5))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    if order == 0:
        return g
    if order == 1:
        w = x * g
        return w / np.sum(x * w)
    raise ValueError(f"unsupported derivative order {order}")


def _single_plane(img: MultiChannelImage, operation: str) -> np.ndarray:
    if img.channels != 1:
        raise ShapeError(f"{operation} needs a single-channel image, got {img.channels} channels")
    return img.plane(0)


def _smooth(plane: np.ndarray, sigma: float) -> np.ndarray:
    g = gaussian_kernel(sigma)
    out = ndimage.correlate1d(plane, g, axis=0, mode="nearest")
    return ndimage.correlate1d(out, g, axis=1, mode="nearest")


def gradient_planes(plane: np.ndarray, spec: FilterSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Compute (gx, gy) of a float64 plane; gx along columns (u), gy along rows (v).

    Raises:
        ValueError: If spec is not a gradient filter
    """
    if spec.kind is FilterKind.CENTRAL_DIFFERENCE:
        gx = ndimage.correlate1d(plane, _CENTRAL_DIFFERENCE, axis=1, mode="nearest")
        gy = ndimage.correlate1d(plane, _CENTRAL_DIFFERENCE, axis=0, mode="nearest")
        return gx, gy
    if spec.kind is FilterKind.DERIVATIVE_OF_GAUSSIAN:
        g = gaussian_kernel(spec.sigma)
        dg = gaussian_kernel(spec.sigma, order=1)
        gx = ndimage.correlate1d(ndimage.correlate1d(plane, g, axis=0, mode="nearest"), dg, axis=1, mode="nearest")
        gy = ndimage.correlate1d(ndimage.correlate1d(plane, g, axis=1, mode="nearest"), dg, axis=0, mode="nearest")
        return gx, gy
    raise ValueError(f"{spec.kind.value} is not a gradient filter")


def laplacian_plane(plane: np.ndarray) -> np.ndarray:
    """5-point Laplacian of a float64 plane with replicated borders."""
    return ndimage.correlate(plane, _LAPLACIAN_STENCIL, mode="nearest")


def gradient(
    img: MultiChannelImage, spec: FilterSpec | None = None
) -> tuple[MultiChannelImage, MultiChannelImage]:
    """
    Image gradient of a single-channel image.

    Args:
        img: Single-channel image
        spec: Central difference (default) or derivative-of-Gaussian

    Returns:
        tuple: (gx, gy) images of the same size

    Raises:
        ShapeError: If img has more than one channel
    """
    plane = _single_plane(img, "gradient")
    gx, gy = gradient_planes(plane, spec or FilterSpec.central_difference())
    return MultiChannelImage(gx), MultiChannelImage(gy)


def gradient_magnitude(img: MultiChannelImage, spec: FilterSpec | None = None) -> MultiChannelImage:
    """Per-pixel Euclidean norm of the gradient."""
    plane = _single_plane(img, "gradient_magnitude")
    gx, gy = gradient_planes(plane, spec or FilterSpec.central_difference())
    return MultiChannelImage(np.hypot(gx, gy))


def laplacian(img: MultiChannelImage) -> MultiChannelImage:
    """5-point-stencil Laplacian of a single-channel image."""
    return MultiChannelImage(laplacian_plane(_single_plane(img, "laplacian")))


def filter_plane(plane: np.ndarray, spec: FilterSpec) -> np.ndarray:
    """Apply a smoothing, band-pass, Laplacian or median filter to one float64 plane."""
    if spec.kind is FilterKind.GAUSSIAN:
        return _smooth(plane, spec.sigma)
    if spec.kind is FilterKind.DIFFERENCE_OF_GAUSSIANS:
        return _smooth(plane, spec.sigma) - _smooth(plane, spec.sigma2)
    if spec.kind is FilterKind.MEDIAN:
        return ndimage.median_filter(plane, size=2 * spec.radius + 1, mode="nearest")
    if spec.kind is FilterKind.LAPLACIAN_5PT:
        return laplacian_plane(plane)
    raise ValueError(f"{spec.kind.value} is a gradient filter; use gradient()")


def filter_image(img: MultiChannelImage, spec: FilterSpec) -> MultiChannelImage:
    """
    Filter every channel of an image independently.

    Args:
        img: Image with any number of channels
        spec: Gaussian, difference-of-Gaussians, 5-point Laplacian or median

    Returns:
        MultiChannelImage: Filtered image of the same size
    """
    planes = [filter_plane(img.plane(c), spec) for c in range(img.channels)]
    return MultiChannelImage.from_planes(planes)


def resample(img: MultiChannelImage, factor: int = 2, direction: str = "down") -> MultiChannelImage:
    """
    Stride-subsample or nearest-neighbor upsample by a factor of two.

    Raises:
        ShapeError: When downsampling an image with a one-pixel dimension
    """
    if factor != 2:
        raise ValueError(f"only factor 2 is supported, got {factor}")
    if direction == "down":
        if img.width == 1 or img.height == 1:
            raise ShapeError(f"cannot downsample a {img.width}x{img.height} image")
        return MultiChannelImage(img.data[::2, ::2], img.kind)
    if direction == "up":
        return MultiChannelImage(np.repeat(np.repeat(img.data, 2, axis=0), 2, axis=1), img.kind)
    raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")


def resize_to_width(img: MultiChannelImage, target_width: int = 800) -> MultiChannelImage:
    """
    Bilinearly shrink an image to a target width, keeping its aspect ratio.

    Images that are already at most target_width wide are returned as a copy.
    """
    if target_width >= img.width:
        return MultiChannelImage(img.data, img.kind)
    height = max(1, int(np.floor(img.height * target_width / img.width + 0.5)))
    out = resize(
        img.data.astype(np.float64),
        (height, target_width, img.channels),
        order=1,
        mode="edge",
        anti_aliasing=False,
        preserve_range=True,
    )
    if img.kind is ImageKind.NORMALS:
        norms = np.linalg.norm(out, axis=2, keepdims=True)
        out = np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)
    elif img.kind is ImageKind.PROBABILITY:
        out = np.clip(out, 0.0, 1.0)
    logger.debug("Resized %dx%d to %dx%d", img.width, img.height, target_width, height)
    return MultiChannelImage(out, img.kind)
