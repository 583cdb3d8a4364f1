"""
Synthetic scenes with exact color, disparity and normals.

Provides:
- Scene description types (primitives, light, canvas, seed)
- Analytic z-buffered ray casting of planes, boxes, spheres and quads
- Contour and crease masks from the rendered surface labels
- Structured corruption of disparity, normals and color that imitates
  stereo and monocular estimator failures
- Seeded random scene layout for dataset generation
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from edgefuse.ground_truth import CameraIntrinsics
from edgefuse.utils.errors import InputError
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

AMBIENT = 0.25
MIN_DISPARITY = 0.1

# Surface labels pack the primitive index and face: label = index * FACE_SLOTS + face
FACE_SLOTS = 8

Vec3 = tuple[float, float, float]


class PrimitiveKind(Enum):
    PLANE = "plane"
    BOX = "box"
    SPHERE = "sphere"
    QUAD = "quad"


class Texture(Enum):
    """Procedural albedo modulation."""

    FLAT = "flat"
    CHECKER = "checker"
    STRIPES = "stripes"


def rotation_matrix(angles: Vec3) -> np.ndarray:
    """Rotation Rz @ Ry @ Rx for Euler angles (radians) about x, y and z."""
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


@dataclass(frozen=True)
class Primitive:
    """
    One scene primitive in camera coordinates (x right, y down, z forward).

    Attributes:
        kind: Primitive type
        center: Center point; for planes any point on the plane
        rotation: Euler angles in radians; an unrotated plane or quad faces the camera
        size: Box half extents; sphere radius in the first slot; quad half width and height
        albedo: Linear RGB reflectance in [0, 1]
        texture: Albedo pattern
        texture_scale: Pattern period in world units
    """

    kind: PrimitiveKind
    center: Vec3
    rotation: Vec3 = (0.0, 0.0, 0.0)
    size: Vec3 = (1.0, 1.0, 1.0)
    albedo: Vec3 = (0.7, 0.7, 0.7)
    texture: Texture = Texture.FLAT
    texture_scale: float = 0.15

    def __post_init__(self) -> None:
        if self.kind is not PrimitiveKind.PLANE and min(self.size[:2]) <= 0:
            raise ValueError(f"{self.kind.value} size must be positive, got {self.size}")
        if self.kind is PrimitiveKind.BOX and self.size[2] <= 0:
            raise ValueError(f"box size must be positive, got {self.size}")
        if not all(0.0 <= a <= 1.0 for a in self.albedo):
            raise ValueError(f"albedo must lie in [0, 1], got {self.albedo}")
        if self.texture_scale <= 0:
            raise ValueError("texture_scale must be > 0")


@dataclass(frozen=True)
class SceneSpec:
    """
    Everything needed to render one scene deterministically.

    Attributes:
        width: Canvas width in pixels
        height: Canvas height in pixels
        primitives: Scene content; must include a background plane
        light: Direction toward the light in the normals frame (x right, y up, z toward camera)
        seed: Seed the layout was drawn from, kept for the dataset index
        baseline_focal: Stereo baseline times focal length
        texture_contrast: Albedo modulation amplitude of textured surfaces
        contour_jump: Minimum disparity drop across an occluding contour
        crease_angle: Minimum normal angle in degrees across a crease
    """

    width: int
    height: int
    primitives: tuple[Primitive, ...]
    light: Vec3 = (0.3, 0.4, 0.866)
    seed: int = 0
    baseline_focal: float = 60.0
    texture_contrast: float = 0.5
    contour_jump: float = 0.5
    crease_angle: float = 20.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"canvas must be at least 1x1, got {self.width}x{self.height}")
        if not self.primitives:
            raise ValueError("scene is empty")
        if not any(p.kind is PrimitiveKind.PLANE for p in self.primitives):
            raise ValueError("scene needs a background plane")
        if not np.isclose(np.linalg.norm(self.light), 1.0, atol=1e-6):
            raise ValueError(f"light direction must be a unit vector, got {self.light}")
        if not 0.0 <= self.texture_contrast < 1.0:
            raise ValueError("texture_contrast must lie in [0, 1)")

    @property
    def camera(self) -> CameraIntrinsics:
        return CameraIntrinsics.for_canvas(self.width, self.height, self.baseline_focal)


@dataclass(frozen=True, eq=False)
class SceneTruth:
    """
    Exact rendering of a scene.

    Arrays are (height, width[, 3]). Normals use the frame x right, y up,
    z toward the camera. Color is linear RGB in [0, 255].
    """

    color: np.ndarray
    disparity: np.ndarray
    normals: np.ndarray
    contour_mask: np.ndarray
    crease_mask: np.ndarray
    surface_id: np.ndarray
    pattern: np.ndarray
    albedo: np.ndarray
    shading: np.ndarray
    camera: CameraIntrinsics
    texture_contrast: float


@dataclass(frozen=True)
class CorruptionSpec:
    """
    Magnitudes of the simulated estimator errors (`corrupt.*` in a run config).

    Attributes:
        band_width: Width in pixels of the disocclusion band left of near-side contours
        band_sigma: Noise std inside the disocclusion band
        blur_sigma: Gaussian blur of the disparity estimate
        quantization: Disparity quantization step; 0 disables
        flat_sigma: Std of smooth noise over untextured surfaces
        normal_leak: How strongly color texture gradients leak into normals
        normal_blur: Gaussian blur of the normal estimate
        texture_contrast: Multiplier on the rendered texture contrast of the color input
        shadow_strength: Darkening of a random cast-shadow ellipse
    """

    band_width: int = 6
    band_sigma: float = 2.0
    blur_sigma: float = 1.0
    quantization: float = 0.25
    flat_sigma: float = 0.5
    normal_leak: float = 0.3
    normal_blur: float = 1.0
    texture_contrast: float = 1.0
    shadow_strength: float = 0.3

    def __post_init__(self) -> None:
        if self.band_width < 0:
            raise ValueError("band_width must be >= 0")
        for name in ("band_sigma", "blur_sigma", "quantization", "flat_sigma", "normal_leak", "normal_blur"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.texture_contrast < 0:
            raise ValueError("texture_contrast must be >= 0")
        if not 0.0 <= self.shadow_strength <= 1.0:
            raise ValueError("shadow_strength must lie in [0, 1]")

    @classmethod
    def identity(cls) -> CorruptionSpec:
        """Spec that leaves every channel untouched."""
        return cls(
            band_width=0,
            band_sigma=0.0,
            blur_sigma=0.0,
            quantization=0.0,
            flat_sigma=0.0,
            normal_leak=0.0,
            normal_blur=0.0,
            texture_contrast=1.0,
            shadow_strength=0.0,
        )


@dataclass(frozen=True, eq=False)
class Estimates:
    """Corrupted channels fed to the fusion network."""

    color: np.ndarray
    disparity: np.ndarray
    normals: np.ndarray


@dataclass(frozen=True)
class SceneConfig:
    """Layout knobs for random scenes (`scene.*` in a run config)."""

    width: int = 128
    height: int = 128
    baseline_focal: float = 60.0
    texture_contrast: float = 0.5
    texture_scale: float = 0.15
    contour_jump: float = 0.5
    crease_angle: float = 20.0
    max_objects: int = 4

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise ValueError(f"canvas must be at least 8x8, got {self.width}x{self.height}")
        if self.max_objects < 1:
            raise ValueError("max_objects must be >= 1")


# --- Ray casting ---


@dataclass
class _Hits:
    """Per-pixel ray parameter, camera-frame normal, texture coordinates and face."""

    t: np.ndarray
    normal: np.ndarray
    uv: np.ndarray
    face: np.ndarray


def _rays(camera: CameraIntrinsics, width: int, height: int) -> np.ndarray:
    """Unnormalized viewing rays with unit z, so the ray parameter equals depth."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([(u - camera.cx) / camera.focal, (v - camera.cy) / camera.focal, np.ones_like(u)], axis=2)


def _no_hits(shape: tuple[int, int]) -> _Hits:
    return _Hits(
        t=np.full(shape, np.inf),
        normal=np.zeros((*shape, 3)),
        uv=np.zeros((*shape, 2)),
        face=np.zeros(shape, dtype=np.int32),
    )


def _intersect_plane(prim: Primitive, rays: np.ndarray, bounded: bool) -> _Hits:
    rot = rotation_matrix(prim.rotation)
    center = np.asarray(prim.center, dtype=np.float64)
    normal = rot @ np.array([0.0, 0.0, -1.0])
    hits = _no_hits(rays.shape[:2])

    denom = rays @ normal
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > 1e-12, (center @ normal) / denom, np.inf)
    ok = np.isfinite(t) & (t > 0)
    local = ((rays * np.where(ok, t, 0.0)[..., None]) - center) @ rot
    if bounded:
        ok &= (np.abs(local[..., 0]) <= prim.size[0]) & (np.abs(local[..., 1]) <= prim.size[1])

    hits.t[ok] = t[ok]
    hits.normal[ok] = normal
    hits.uv[ok] = local[ok][:, :2]
    return hits


def _intersect_box(prim: Primitive, rays: np.ndarray) -> _Hits:
    rot = rotation_matrix(prim.rotation)
    half = np.asarray(prim.size, dtype=np.float64)
    origin = -(rot.T @ np.asarray(prim.center, dtype=np.float64))
    direction = rays @ rot
    hits = _no_hits(rays.shape[:2])

    safe = np.where(np.abs(direction) < 1e-12, np.copysign(1e-12, direction), direction)
    t1 = (-half - origin) / safe
    t2 = (half - origin) / safe
    near = np.minimum(t1, t2)
    t_enter = near.max(axis=2)
    t_exit = np.maximum(t1, t2).min(axis=2)
    ok = (t_enter <= t_exit) & (t_enter > 0)

    axis = near.argmax(axis=2)
    d_axis = np.take_along_axis(direction, axis[..., None], axis=2)[..., 0]
    # A ray moving along +axis enters through the negative face
    outward = np.where(d_axis > 0, -1.0, 1.0)
    local_normal = np.zeros(rays.shape)
    np.put_along_axis(local_normal, axis[..., None], outward[..., None], axis=2)
    local = origin + direction * t_enter[..., None]

    # Texture coordinates are the two in-face axes
    others = np.array([[1, 2], [0, 2], [0, 1]])[axis]
    uv = np.take_along_axis(local, others, axis=2)

    hits.t[ok] = t_enter[ok]
    hits.normal[ok] = local_normal[ok] @ rot.T
    hits.uv[ok] = uv[ok]
    hits.face[ok] = (axis * 2 + (outward > 0))[ok]
    return hits


def _intersect_sphere(prim: Primitive, rays: np.ndarray) -> _Hits:
    rot = rotation_matrix(prim.rotation)
    center = np.asarray(prim.center, dtype=np.float64)
    radius = prim.size[0]
    hits = _no_hits(rays.shape[:2])

    a = np.einsum("hwc,hwc->hw", rays, rays)
    b = -2.0 * (rays @ center)
    c = center @ center - radius * radius
    disc = b * b - 4.0 * a * c
    ok = disc >= 0
    t = np.where(ok, (-b - np.sqrt(np.where(ok, disc, 0.0))) / (2.0 * a), np.inf)
    ok &= t > 0

    point = rays * t[..., None]
    normal = (point - center) / radius
    local = normal @ rot
    uv = np.stack(
        [radius * np.arctan2(local[..., 1], local[..., 0]), radius * np.arccos(np.clip(local[..., 2], -1.0, 1.0))],
        axis=2,
    )

    hits.t[ok] = t[ok]
    hits.normal[ok] = normal[ok]
    hits.uv[ok] = uv[ok]
    return hits


def _intersect(prim: Primitive, rays: np.ndarray) -> _Hits:
    if prim.kind is PrimitiveKind.PLANE:
        return _intersect_plane(prim, rays, bounded=False)
    if prim.kind is PrimitiveKind.QUAD:
        return _intersect_plane(prim, rays, bounded=True)
    if prim.kind is PrimitiveKind.BOX:
        return _intersect_box(prim, rays)
    return _intersect_sphere(prim, rays)


def _pattern(texture: Texture, uv: np.ndarray, scale: float) -> np.ndarray:
    cells = np.floor(uv / scale).astype(np.int64)
    if texture is Texture.CHECKER:
        return np.where((cells[..., 0] + cells[..., 1]) % 2 == 0, 1.0, -1.0)
    if texture is Texture.STRIPES:
        return np.where(cells[..., 0] % 2 == 0, 1.0, -1.0)
    return np.zeros(uv.shape[:2])


def _shift(arr: np.ndarray, dy: int, dx: int, fill: np.ndarray) -> np.ndarray:
    """arr[v + dy, u + dx], with `fill` where the neighbor falls off the canvas."""
    out = fill.copy()
    h, w = arr.shape[:2]
    dst_v = slice(max(0, -dy), h - max(0, dy))
    dst_u = slice(max(0, -dx), w - max(0, dx))
    src_v = slice(max(0, dy), h - max(0, -dy))
    src_u = slice(max(0, dx), w - max(0, -dx))
    out[dst_v, dst_u] = arr[src_v, src_u]
    return out


_NEIGHBORS = ((0, 1), (0, -1), (1, 0), (-1, 0))


def contour_mask(disparity: np.ndarray, surface_id: np.ndarray, jump: float) -> np.ndarray:
    """
    Near-side pixels of occluding contours.

    A pixel is marked when a 4-neighbor belongs to another surface and has
    disparity lower by more than `jump`.
    """
    mask = np.zeros(disparity.shape, dtype=bool)
    for dy, dx in _NEIGHBORS:
        other_d = _shift(disparity, dy, dx, disparity)
        other_id = _shift(surface_id, dy, dx, surface_id)
        mask |= (other_id != surface_id) & (disparity - other_d > jump)
    return mask


def crease_mask(
    disparity: np.ndarray, normals: np.ndarray, surface_id: np.ndarray, jump: float, angle_deg: float
) -> np.ndarray:
    """
    Pixels where two depth-continuous surfaces meet at an angle.

    Marks the pixel on the upper or left side of each qualifying neighbor pair.
    """
    cos_limit = np.cos(np.deg2rad(angle_deg))
    mask = np.zeros(disparity.shape, dtype=bool)
    for dy, dx in ((0, 1), (1, 0)):
        other_d = _shift(disparity, dy, dx, disparity)
        other_id = _shift(surface_id, dy, dx, surface_id)
        other_n = _shift(normals, dy, dx, normals)
        cos = np.einsum("hwc,hwc->hw", normals, other_n)
        mask |= (other_id != surface_id) & (np.abs(disparity - other_d) <= jump) & (cos < cos_limit)
    return mask


def render(spec: SceneSpec) -> SceneTruth:
    """
    Ray cast a scene at pixel centers.

    Args:
        spec: Scene description

    Returns:
        SceneTruth: Exact color, disparity, normals, masks and shading terms

    Raises:
        InputError: If some pixel sees no surface
    """
    camera = spec.camera
    rays = _rays(camera, spec.width, spec.height)
    shape = (spec.height, spec.width)

    depth = np.full(shape, np.inf)
    normal = np.zeros((*shape, 3))
    surface_id = np.full(shape, -1, dtype=np.int32)
    pattern = np.zeros(shape)
    albedo = np.zeros((*shape, 3))

    for index, prim in enumerate(spec.primitives):
        hits = _intersect(prim, rays)
        # Strict comparison keeps the earlier primitive on exact ties
        closer = hits.t < depth
        depth[closer] = hits.t[closer]
        normal[closer] = hits.normal[closer]
        surface_id[closer] = index * FACE_SLOTS + hits.face[closer]
        pattern[closer] = _pattern(prim.texture, hits.uv, prim.texture_scale)[closer]
        albedo[closer] = prim.albedo

    if not np.isfinite(depth).all():
        missing = int((~np.isfinite(depth)).sum())
        raise InputError(f"scene seed {spec.seed}: {missing} pixels see no surface; the background must cover the view")

    # Face the viewer, then convert to x right, y up, z toward camera
    facing = np.einsum("hwc,hwc->hw", normal, rays) > 0
    normal[facing] *= -1.0
    normals = normal * np.array([1.0, -1.0, -1.0])
    normals /= np.linalg.norm(normals, axis=2, keepdims=True)

    disparity = spec.baseline_focal / depth
    lambert = np.clip(normals @ np.asarray(spec.light, dtype=np.float64), 0.0, 1.0)
    shading = AMBIENT + (1.0 - AMBIENT) * lambert
    color = _shade(albedo, shading, pattern, spec.texture_contrast)

    contours = contour_mask(disparity, surface_id, spec.contour_jump)
    creases = crease_mask(disparity, normals, surface_id, spec.contour_jump, spec.crease_angle) & ~contours
    logger.debug(
        "Rendered seed %d: %d contour px, %d crease px", spec.seed, int(contours.sum()), int(creases.sum())
    )
    return SceneTruth(
        color=color,
        disparity=disparity,
        normals=normals,
        contour_mask=contours,
        crease_mask=creases,
        surface_id=surface_id,
        pattern=pattern,
        albedo=albedo,
        shading=shading,
        camera=camera,
        texture_contrast=spec.texture_contrast,
    )


def _shade(albedo: np.ndarray, shading: np.ndarray, pattern: np.ndarray, contrast: float) -> np.ndarray:
    modulation = 1.0 + contrast * pattern
    return np.clip(255.0 * albedo * (shading * modulation)[..., None], 0.0, 255.0)


# --- Corruption ---


def disocclusion_band(truth: SceneTruth, width: int) -> np.ndarray:
    """
    Far-side pixels within `width` columns left of a near-side contour pixel.

    These are the pixels a left-reference stereo matcher cannot see in the
    right view.
    """
    band = np.zeros(truth.disparity.shape, dtype=bool)
    d = truth.disparity
    sid = truth.surface_id
    for k in range(1, width + 1):
        near = np.zeros_like(band)
        near[:, :-k] = truth.contour_mask[:, k:]
        farther = np.zeros_like(band)
        farther[:, :-k] = (d[:, k:] > d[:, :-k]) & (sid[:, k:] != sid[:, :-k])
        band |= near & farther
    return band


def _smooth_noise(rng: np.random.Generator, shape: tuple[int, int], sigma: float) -> np.ndarray:
    field_ = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="reflect")
    std = field_.std()
    return field_ / std if std > 0 else field_


def _shadow_factor(rng: np.random.Generator, shape: tuple[int, int], strength: float) -> np.ndarray:
    h, w = shape
    cy, cx = rng.uniform(0, h), rng.uniform(0, w)
    ry, rx = rng.uniform(0.15, 0.4, size=2) * max(h, w)
    theta = rng.uniform(0, np.pi)
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    a = (u - cx) * np.cos(theta) + (v - cy) * np.sin(theta)
    b = -(u - cx) * np.sin(theta) + (v - cy) * np.cos(theta)
    inside = (a / rx) ** 2 + (b / ry) ** 2 <= 1.0
    return np.where(inside, 1.0 - strength, 1.0)


def corrupt(truth: SceneTruth, spec: CorruptionSpec, seed: int) -> Estimates:
    """
    Simulate unreliable estimates of the rendered channels.

    Disparity: blur, noise in the disocclusion band, smooth noise over
    untextured surfaces, quantization, clamp to positive values.
    Normals: blur plus texture-correlated tilt, renormalized.
    Color: texture contrast rescaled and a cast shadow added.

    The truth arrays are never modified. The identity spec returns exact copies.

    Args:
        truth: Rendered scene
        spec: Error magnitudes
        seed: Noise seed

    Returns:
        Estimates: Corrupted color, disparity and normals
    """
    rng = np.random.default_rng(seed)
    shape = truth.disparity.shape

    disparity = truth.disparity.copy()
    if spec.blur_sigma > 0:
        disparity = ndimage.gaussian_filter(disparity, spec.blur_sigma, mode="nearest")
    if spec.band_width > 0 and spec.band_sigma > 0:
        band = disocclusion_band(truth, spec.band_width)
        disparity[band] += rng.normal(0.0, spec.band_sigma, size=int(band.sum()))
    if spec.flat_sigma > 0:
        untextured = truth.pattern == 0
        disparity[untextured] += spec.flat_sigma * _smooth_noise(rng, shape, 4.0)[untextured]
    if spec.quantization > 0:
        disparity = np.round(disparity / spec.quantization) * spec.quantization
    disparity = np.maximum(disparity, MIN_DISPARITY)

    normals = truth.normals.copy()
    if spec.normal_leak > 0 or spec.normal_blur > 0:
        if spec.normal_blur > 0:
            normals = ndimage.gaussian_filter(normals, (spec.normal_blur, spec.normal_blur, 0), mode="nearest")
        if spec.normal_leak > 0:
            texture = ndimage.gaussian_filter(truth.pattern, 1.0, mode="nearest")
            gv, gu = np.gradient(texture)
            normals[..., 0] += spec.normal_leak * gu
            normals[..., 1] -= spec.normal_leak * gv
        norms = np.linalg.norm(normals, axis=2, keepdims=True)
        normals = normals / np.maximum(norms, 1e-12)

    if spec.texture_contrast == 1.0 and spec.shadow_strength == 0:
        color = truth.color.copy()
    else:
        color = _shade(truth.albedo, truth.shading, truth.pattern, truth.texture_contrast * spec.texture_contrast)
        if spec.shadow_strength > 0:
            color = color * _shadow_factor(rng, shape, spec.shadow_strength)[..., None]

    return Estimates(color=color, disparity=disparity, normals=normals)


# --- Random layouts ---


def _random_texture(rng: np.random.Generator) -> Texture:
    return (Texture.FLAT, Texture.CHECKER, Texture.STRIPES)[int(rng.integers(0, 3))]


def _random_albedo(rng: np.random.Generator) -> Vec3:
    a = rng.uniform(0.25, 0.9, size=3)
    return (float(a[0]), float(a[1]), float(a[2]))


def _place(rng: np.random.Generator, camera: CameraIntrinsics, width: int, height: int, z: float) -> Vec3:
    """Camera-space point at depth z projecting into the central part of the canvas."""
    u = rng.uniform(0.2, 0.8) * (width - 1)
    v = rng.uniform(0.2, 0.8) * (height - 1)
    return ((u - camera.cx) * z / camera.focal, (v - camera.cy) * z / camera.focal, z)


def random_scene(config: SceneConfig, seed: int) -> SceneSpec:
    """
    Draw a random desk-scale scene: a tilted textured background plane plus
    a few boxes, spheres and slanted quads in front of it.

    Args:
        config: Canvas and layout knobs
        seed: Layout seed

    Returns:
        SceneSpec: Deterministic in (config, seed)
    """
    rng = np.random.default_rng(seed)
    camera = CameraIntrinsics.for_canvas(config.width, config.height, config.baseline_focal)

    tilt = rng.uniform(-0.25, 0.25, size=2)
    primitives = [
        Primitive(
            kind=PrimitiveKind.PLANE,
            center=(0.0, 0.0, float(rng.uniform(6.0, 8.0))),
            rotation=(float(tilt[0]), float(tilt[1]), 0.0),
            albedo=_random_albedo(rng),
            texture=_random_texture(rng),
            texture_scale=config.texture_scale * 2.0,
        )
    ]

    n_objects = int(rng.integers(1, config.max_objects + 1))
    for _ in range(n_objects):
        z = float(rng.uniform(2.5, 4.5))
        center = _place(rng, camera, config.width, config.height, z)
        kind = (PrimitiveKind.BOX, PrimitiveKind.BOX, PrimitiveKind.SPHERE, PrimitiveKind.QUAD)[int(rng.integers(0, 4))]
        angles = rng.uniform(-0.7, 0.7, size=3)
        if kind is PrimitiveKind.BOX:
            half = rng.uniform(0.2, 0.45, size=3)
            size: Vec3 = (float(half[0]), float(half[1]), float(half[2]))
        elif kind is PrimitiveKind.SPHERE:
            r = float(rng.uniform(0.25, 0.45))
            size = (r, r, r)
        else:
            half = rng.uniform(0.25, 0.5, size=2)
            size = (float(half[0]), float(half[1]), 0.0)
            angles[2] = 0.0
        primitives.append(
            Primitive(
                kind=kind,
                center=center,
                rotation=(float(angles[0]), float(angles[1]), float(angles[2])),
                size=size,
                albedo=_random_albedo(rng),
                texture=_random_texture(rng),
                texture_scale=config.texture_scale,
            )
        )

    light = np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), 1.0])
    light /= np.linalg.norm(light)
    return SceneSpec(
        width=config.width,
        height=config.height,
        primitives=tuple(primitives),
        light=(float(light[0]), float(light[1]), float(light[2])),
        seed=seed,
        baseline_focal=config.baseline_focal,
        texture_contrast=config.texture_contrast,
        contour_jump=config.contour_jump,
        crease_angle=config.crease_angle,
    )
