"""
Hierarchical segmentation from a depth-edge probability map.

Provides:
- Watershed base regions with crack-edge boundary arcs
- Greedy agglomeration into a merge tree and ultrametric contour map (UCM)
- Contour strengthening of segments that continue stronger segments
- Threshold extraction, UCM rasters and output files

Boundaries live on cracks, the edges between 4-adjacent pixels. In the
double-resolution grid of shape (2H+1, 2W+1), pixel (y, x) sits at
(2y+1, 2x+1), the crack to its right at (2y+1, 2x+2) and the crack below
it at (2y+2, 2x+1).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage.morphology import local_minima
from skimage.segmentation import watershed as skimage_watershed

from edgefuse.ground_truth import LogisticParams, logistic
from edgefuse.utils.errors import ParseError, ShapeError
from edgefuse.utils.formats import atomic_write_text, read_pnm, write_pfm, write_pgm, write_ppm
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)


class StrengthenMode(Enum):
    """How the strengthening value updates a segment strength."""

    FACTOR = "factor"
    REPLACE = "replace"
    OFF = "off"


@dataclass(frozen=True)
class SegmentConfig:
    """
    Segmentation knobs (`segment.*` in a run config).

    Attributes:
        strengthen: Strengthening mode
        saturation: Arc length, as a fraction of image width, where the length logistic saturates
        sharpness: Sharpness of the length logistic
        connect_radius: Endpoint distance in pixels under which two segments count as connected
        tangent_points: Terminal points used for endpoint tangent fits
        threshold: Level used for the label map and overlay outputs
    """

    strengthen: StrengthenMode = StrengthenMode.FACTOR
    saturation: float = 0.7
    sharpness: float = 10.0
    connect_radius: float = 2.0
    tangent_points: int = 5
    threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.saturation <= 0 or self.sharpness <= 0:
            raise ValueError("saturation and sharpness must be > 0")
        if self.connect_radius < 0:
            raise ValueError("connect_radius must be >= 0")
        if self.tangent_points < 2:
            raise ValueError("tangent_points must be >= 2")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class CrackSet:
    """
    All cracks between different base regions.

    Attributes:
        position: (K, 2) double-resolution (row, col) coordinates
        value: (K,) crack strength, the larger edge probability of its two pixels
        regions: (K, 2) base labels on either side, smaller first
    """

    position: np.ndarray
    value: np.ndarray
    regions: np.ndarray

    def __len__(self) -> int:
        return int(self.value.shape[0])

    def points(self, index: np.ndarray) -> np.ndarray:
        """Crack midpoints in pixel units (row, col)."""
        return (self.position[index] - 1) / 2.0


@dataclass(frozen=True, eq=False)
class BoundaryArc:
    """The cracks shared by one pair of adjacent regions."""

    regions: tuple[int, int]
    cracks: np.ndarray
    strength: float

    @property
    def length(self) -> int:
        return int(self.cracks.shape[0])


@dataclass(frozen=True)
class Merge:
    """Regions a and b (cluster ids) join into a new cluster at `strength`."""

    a: int
    b: int
    strength: float


@dataclass(frozen=True, eq=False)
class SegmentationHierarchy:
    """
    Base partition plus merge tree.

    Cluster ids 0..n_regions-1 are base regions; merge i creates cluster
    n_regions + i. `segments[i]` holds the crack indices that separate the
    two clusters of merge i.
    """

    labels: np.ndarray
    n_regions: int
    cracks: CrackSet
    arcs: tuple[BoundaryArc, ...]
    merges: tuple[Merge, ...] = ()
    segments: tuple[np.ndarray, ...] = field(default=())

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.labels.shape[0]), int(self.labels.shape[1]))

    @property
    def strengths(self) -> np.ndarray:
        return np.array([m.strength for m in self.merges], dtype=np.float64)

    def threshold(self, t: float) -> np.ndarray:
        """Label map after applying every merge with strength < t."""
        return threshold_segmentation(self, t)

    def cophenetic(self, a: int, b: int) -> float:
        """Strength of the merge that first joins base regions a and b (0 for a == b)."""
        if a == b:
            return 0.0
        parent = self._parents()
        ancestors_a = set()
        node = a
        while node in parent:
            merge_index = parent[node]
            ancestors_a.add(merge_index)
            node = self.n_regions + merge_index
        node = b
        while node in parent:
            merge_index = parent[node]
            if merge_index in ancestors_a:
                return self.merges[merge_index].strength
            node = self.n_regions + merge_index
        return float("inf")

    def _parents(self) -> dict[int, int]:
        parent = {}
        for i, m in enumerate(self.merges):
            parent[m.a] = i
            parent[m.b] = i
        return parent


# --- Base partition ---


def _as_probability(edge_prob: np.ndarray) -> np.ndarray:
    p = np.asarray(edge_prob, dtype=np.float64)
    if p.ndim == 3 and p.shape[2] == 1:
        p = p[:, :, 0]
    if p.ndim != 2:
        raise ShapeError(f"edge map must be 2-D, got shape {p.shape}")
    return p


def find_cracks(labels: np.ndarray, edge_prob: np.ndarray) -> CrackSet:
    """Collect the cracks between differently labeled 4-neighbors."""
    p = _as_probability(edge_prob)
    ys, xs = np.nonzero(labels[:, :-1] != labels[:, 1:])
    ys2, xs2 = np.nonzero(labels[:-1, :] != labels[1:, :])

    position = np.concatenate(
        [np.stack([2 * ys + 1, 2 * xs + 2], axis=1), np.stack([2 * ys2 + 2, 2 * xs2 + 1], axis=1)]
    ).astype(np.int64)
    value = np.concatenate([np.maximum(p[ys, xs], p[ys, xs + 1]), np.maximum(p[ys2, xs2], p[ys2 + 1, xs2])])
    first = np.concatenate([labels[ys, xs], labels[ys2, xs2]])
    second = np.concatenate([labels[ys, xs + 1], labels[ys2 + 1, xs2]])
    regions = np.stack([np.minimum(first, second), np.maximum(first, second)], axis=1).astype(np.int64)
    return CrackSet(position=position.reshape(-1, 2), value=value.astype(np.float64), regions=regions.reshape(-1, 2))


def _group_arcs(cracks: CrackSet) -> tuple[BoundaryArc, ...]:
    if len(cracks) == 0:
        return ()
    order = np.lexsort((cracks.regions[:, 1], cracks.regions[:, 0]))
    pairs = cracks.regions[order]
    starts = np.flatnonzero(np.r_[True, np.any(pairs[1:] != pairs[:-1], axis=1)])
    groups = np.split(order, starts[1:])
    return tuple(
        BoundaryArc(
            regions=(int(cracks.regions[g[0], 0]), int(cracks.regions[g[0], 1])),
            cracks=np.sort(g),
            strength=float(cracks.value[g].mean()),
        )
        for g in groups
    )


def watershed(edge_prob: np.ndarray) -> SegmentationHierarchy:
    """
    Flood the edge map from its regional minima.

    Every pixel receives a 0-based label; boundaries are the cracks between
    differently labeled pixels, grouped into one arc per adjacent region
    pair with strength equal to the mean crack value.

    Args:
        edge_prob: (H, W) edge probabilities in [0, 1]

    Returns:
        SegmentationHierarchy: Base partition with arcs and an empty merge tree
    """
    p = _as_probability(edge_prob)
    markers, n_markers = ndimage.label(local_minima(p, connectivity=1, allow_borders=True))
    labels = skimage_watershed(p, markers, connectivity=1).astype(np.int64) - 1
    cracks = find_cracks(labels, p)
    arcs = _group_arcs(cracks)
    logger.debug("Watershed: %d regions, %d arcs, %d cracks", n_markers, len(arcs), len(cracks))
    return SegmentationHierarchy(labels=labels, n_regions=int(n_markers), cracks=cracks, arcs=arcs)


# --- Agglomeration ---


@dataclass
class _ArcState:
    total: float
    count: int
    cracks: list[np.ndarray]

    @property
    def strength(self) -> float:
        return self.total / self.count


def build_ucm(base: SegmentationHierarchy) -> SegmentationHierarchy:
    """
    Greedily merge the weakest adjacent pair until one region remains.

    When two clusters merge, their arcs toward a common neighbor combine and
    the strength becomes the mean over all combined cracks. Merge strengths
    never decrease, so they are the cophenetic distances of an ultrametric.

    Args:
        base: Output of watershed()

    Returns:
        SegmentationHierarchy: The base partition with its merge tree
    """
    arcs: dict[tuple[int, int], _ArcState] = {}
    neighbors: dict[int, set[int]] = {r: set() for r in range(base.n_regions)}
    heap: list[tuple[float, int, int]] = []
    for arc in base.arcs:
        a, b = arc.regions
        arcs[(a, b)] = _ArcState(float(base.cracks.value[arc.cracks].sum()), arc.length, [arc.cracks])
        neighbors[a].add(b)
        neighbors[b].add(a)
        heapq.heappush(heap, (arc.strength, a, b))

    merges: list[Merge] = []
    segments: list[np.ndarray] = []
    next_id = base.n_regions
    while heap:
        strength, a, b = heapq.heappop(heap)
        state = arcs.get((a, b))
        # Stale entry: one side already merged away
        if state is None:
            continue
        del arcs[(a, b)]
        merged = next_id
        next_id += 1
        merges.append(Merge(a=a, b=b, strength=strength))
        segments.append(np.sort(np.concatenate(state.cracks)))

        neighbors[a].discard(b)
        neighbors[b].discard(a)
        neighbors[merged] = set()
        for n in sorted(neighbors[a] | neighbors[b]):
            combined: _ArcState | None = None
            for old in (a, b):
                key = (min(old, n), max(old, n))
                part = arcs.pop(key, None)
                if part is None:
                    continue
                neighbors[n].discard(old)
                if combined is None:
                    combined = _ArcState(part.total, part.count, list(part.cracks))
                else:
                    combined.total += part.total
                    combined.count += part.count
                    combined.cracks.extend(part.cracks)
            assert combined is not None
            arcs[(n, merged)] = combined
            neighbors[n].add(merged)
            neighbors[merged].add(n)
            heapq.heappush(heap, (combined.strength, n, merged))
        del neighbors[a], neighbors[b]

    logger.debug("Agglomerated %d regions in %d merges", base.n_regions, len(merges))
    return replace(base, merges=tuple(merges), segments=tuple(segments))


def segment(edge_prob: np.ndarray, config: SegmentConfig | None = None) -> SegmentationHierarchy:
    """Watershed, agglomerate and strengthen in one call."""
    cfg = config or SegmentConfig()
    hierarchy = build_ucm(watershed(edge_prob))
    if cfg.strengthen is not StrengthenMode.OFF:
        hierarchy = strengthen_contours(hierarchy, cfg)
    return hierarchy


# --- Queries ---


def _cluster_roots(hierarchy: SegmentationHierarchy, t: float) -> np.ndarray:
    """Root base region of every base region after applying merges with strength < t."""
    parent = np.arange(hierarchy.n_regions)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = int(parent[x])
        return x

    representative = list(range(hierarchy.n_regions))
    for m in hierarchy.merges:
        rep_a, rep_b = representative[m.a], representative[m.b]
        representative.append(rep_a)
        if m.strength < t:
            ra, rb = find(rep_a), find(rep_b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    return np.array([find(r) for r in range(hierarchy.n_regions)], dtype=np.int64)


def _relabel(raw: np.ndarray) -> np.ndarray:
    """Consecutive 0-based labels in order of first appearance in raster order."""
    _, first, inverse = np.unique(raw.ravel(), return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inverse].reshape(raw.shape)


def threshold_segmentation(hierarchy: SegmentationHierarchy, t: float) -> np.ndarray:
    """
    Partition obtained by applying every merge with strength strictly below t.

    Args:
        hierarchy: Base partition plus merge tree
        t: Threshold

    Returns:
        np.ndarray: (H, W) labels numbered 0.. in raster order of first appearance
    """
    roots = _cluster_roots(hierarchy, t)
    return _relabel(roots[hierarchy.labels])


def crack_strengths(hierarchy: SegmentationHierarchy) -> np.ndarray:
    """Per-crack cophenetic strength: the strength of the merge whose segment holds the crack."""
    values = np.zeros(len(hierarchy.cracks))
    for merge, cracks in zip(hierarchy.merges, hierarchy.segments, strict=True):
        values[cracks] = merge.strength
    return values


def ucm_double(hierarchy: SegmentationHierarchy) -> np.ndarray:
    """
    (2H+1, 2W+1) ultrametric contour map.

    Cracks carry their cophenetic strength; vertices carry the maximum of
    their incident cracks; pixel cells are zero.
    """
    h, w = hierarchy.shape
    ucm = np.zeros((2 * h + 1, 2 * w + 1))
    if len(hierarchy.cracks):
        pos = hierarchy.cracks.position
        ucm[pos[:, 0], pos[:, 1]] = crack_strengths(hierarchy)
    vertices = np.zeros_like(ucm)
    vertices[1:, :] = np.maximum(vertices[1:, :], ucm[:-1, :])
    vertices[:-1, :] = np.maximum(vertices[:-1, :], ucm[1:, :])
    vertices[:, 1:] = np.maximum(vertices[:, 1:], ucm[:, :-1])
    vertices[:, :-1] = np.maximum(vertices[:, :-1], ucm[:, 1:])
    ucm[0::2, 0::2] = vertices[0::2, 0::2]
    return ucm


def partition_from_ucm(hierarchy: SegmentationHierarchy, t: float) -> np.ndarray:
    """
    Rebuild the partition at threshold t from the UCM alone.

    Pixels are joined across every crack that is not a region boundary or
    whose UCM value is below t.
    """
    h, w = hierarchy.shape
    ucm = ucm_double(hierarchy)
    boundary = np.zeros_like(ucm, dtype=bool)
    if len(hierarchy.cracks):
        pos = hierarchy.cracks.position
        boundary[pos[:, 0], pos[:, 1]] = True

    passable = np.zeros_like(boundary)
    passable[1::2, 1::2] = True
    cracks = np.zeros_like(boundary)
    cracks[1:-1:2, 2:-1:2] = True
    cracks[2:-1:2, 1:-1:2] = True
    passable |= cracks & (~boundary | (ucm < t))

    components, _ = ndimage.label(passable)
    return _relabel(components[1::2, 1::2])


def ucm_pixels(hierarchy: SegmentationHierarchy) -> np.ndarray:
    """(H, W) UCM: each pixel takes the larger of its right and lower crack strengths."""
    ucm = ucm_double(hierarchy)
    return np.maximum(ucm[1:-1:2, 2::2], ucm[2::2, 1:-1:2])


def boundary_map(labels: np.ndarray) -> np.ndarray:
    """Pixels whose right or lower neighbor carries a different label."""
    edges = np.zeros(labels.shape, dtype=bool)
    edges[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    edges[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return edges


# --- Strengthening ---


@dataclass(frozen=True)
class SegmentGeometry:
    """Endpoints and unit endpoint tangents of a contour segment, in (row, col) pixel units."""

    length: int
    endpoints: np.ndarray
    tangents: np.ndarray


def _principal_axis(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    if not np.any(centered):
        return np.zeros(2)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    return vt[0]


def segment_geometry(points: np.ndarray, tangent_points: int = 5) -> SegmentGeometry:
    """
    Estimate endpoints and tangents of a crack point set.

    Points are ordered along their principal axis; the first and last
    points are the endpoints and the tangent at each end is the principal
    direction of its terminal `tangent_points` points.
    """
    n = int(points.shape[0])
    if n == 0:
        return SegmentGeometry(0, np.zeros((0, 2)), np.zeros((0, 2)))
    axis = _principal_axis(points)
    order = np.argsort(points @ axis, kind="stable")
    ordered = points[order]
    k = min(tangent_points, n)
    head = _principal_axis(ordered[:k])
    tail = _principal_axis(ordered[-k:])
    return SegmentGeometry(
        length=n,
        endpoints=np.stack([ordered[0], ordered[-1]]),
        tangents=np.stack([head, tail]),
    )


def connection_cosine(a: SegmentGeometry, b: SegmentGeometry, radius: float) -> float:
    """
    Largest |cos| of the tangent angle over endpoint pairs closer than `radius`.

    Returns 0 when the segments do not touch.
    """
    best = 0.0
    for i in range(a.endpoints.shape[0]):
        for j in range(b.endpoints.shape[0]):
            if np.linalg.norm(a.endpoints[i] - b.endpoints[j]) <= radius:
                best = max(best, float(abs(a.tangents[i] @ b.tangents[j])))
    return best


def strength_factor(
    strength: float,
    length_weight: float,
    stronger: list[tuple[float, float, float]],
) -> float:
    """
    Strengthening value of one segment.

    1 + max over stronger connected segments j of
    |cos| * max(1, 0.5 * (w_j / w_i) * sqrt(s_i * s_j)), where s is the
    arc-length logistic. A segment with no stronger connected neighbor
    gets 1.

    Args:
        strength: w_i
        length_weight: s_i
        stronger: (w_j, s_j, |cos|) of each stronger connected segment
    """
    if strength <= 0 or not stronger:
        return 1.0
    best = 0.0
    for w_j, s_j, cos in stronger:
        best = max(best, cos * max(1.0, 0.5 * (w_j / strength) * np.sqrt(length_weight * s_j)))
    return 1.0 + best


def strengthen_contours(
    hierarchy: SegmentationHierarchy, config: SegmentConfig | None = None
) -> SegmentationHierarchy:
    """
    Strengthen segments that smoothly continue stronger ones.

    Segments are processed from strongest to weakest, so a segment sees the
    already updated strengths of its stronger neighbors. Strengths are then
    divided by their maximum and raised to the running maximum along each
    root path so the merge tree stays ultrametric.

    Args:
        hierarchy: Agglomerated hierarchy
        config: Mode and geometry knobs

    Returns:
        SegmentationHierarchy: Same tree with updated merge strengths
    """
    cfg = config or SegmentConfig()
    if cfg.strengthen is StrengthenMode.OFF or not hierarchy.merges:
        return hierarchy

    width = hierarchy.shape[1]
    params = LogisticParams(center=0.5 * cfg.saturation * width, sharpness=cfg.sharpness)
    geometry = [segment_geometry(hierarchy.cracks.points(s), cfg.tangent_points) for s in hierarchy.segments]
    length_weight = [float(logistic(g.length, params)) for g in geometry]
    original = hierarchy.strengths
    updated = original.copy()
    endpoints = np.stack([g.endpoints for g in geometry])
    tangents = np.stack([g.tangents for g in geometry])

    for i in np.argsort(-original, kind="stable"):
        candidates = np.flatnonzero(original > original[i])
        stronger = []
        if candidates.size:
            # (candidate, candidate endpoint, own endpoint)
            gaps = np.linalg.norm(endpoints[candidates][:, :, None, :] - endpoints[i][None, None, :, :], axis=3)
            cosines = np.abs(np.einsum("cpk,qk->cpq", tangents[candidates], tangents[i]))
            best = np.where(gaps <= cfg.connect_radius, cosines, 0.0).max(axis=(1, 2))
            stronger = [
                (float(updated[j]), length_weight[j], float(cos))
                for j, cos in zip(candidates, best, strict=True)
                if cos > 0
            ]
        factor = strength_factor(float(original[i]), length_weight[i], stronger)
        updated[i] = original[i] * factor if cfg.strengthen is StrengthenMode.FACTOR else factor

    peak = updated.max()
    if peak > 0:
        updated /= peak

    n = hierarchy.n_regions
    for i, m in enumerate(hierarchy.merges):
        for child in (m.a, m.b):
            if child >= n:
                updated[i] = max(updated[i], updated[child - n])

    merges = tuple(Merge(m.a, m.b, float(s)) for m, s in zip(hierarchy.merges, updated, strict=True))
    logger.debug("Strengthened %d segments (mode %s)", len(merges), cfg.strengthen.value)
    return replace(hierarchy, merges=merges)


# --- Output ---


def overlay(background: np.ndarray, ucm: np.ndarray) -> np.ndarray:
    """
    Blend UCM strengths as red lines over a color or gray background.

    Args:
        background: (H, W, 3) color in [0, 255] or (H, W) probabilities in [0, 1]
        ucm: (H, W) pixel UCM in [0, 1]
    """
    base = np.asarray(background, dtype=np.float64)
    if base.ndim == 2:
        base = np.repeat((255.0 * (1.0 - np.clip(base, 0, 1)))[:, :, np.newaxis], 3, axis=2)
    alpha = np.clip(ucm, 0.0, 1.0)[:, :, np.newaxis]
    red = np.array([255.0, 0.0, 0.0])
    return (1.0 - alpha) * base + alpha * red


def format_merges(hierarchy: SegmentationHierarchy) -> str:
    header = f"# regions {hierarchy.n_regions}\n"
    return header + "".join(f"merge {m.a} {m.b} {m.strength:.9g}\n" for m in hierarchy.merges)


def write_outputs(
    out_dir: str | Path,
    hierarchy: SegmentationHierarchy,
    threshold: float,
    background: np.ndarray | None = None,
) -> list[Path]:
    """
    Write merges.txt, labels.pgm (16-bit base labels), ucm.pfm,
    segments.pgm (labels at `threshold`) and overlay.ppm.

    Raises:
        ShapeError: If there are more base regions than a 16-bit PGM holds
    """
    out = Path(out_dir)
    if hierarchy.n_regions > 65536:
        raise ShapeError(f"{hierarchy.n_regions} base regions do not fit a 16-bit label map")
    ucm = ucm_pixels(hierarchy)
    chosen = threshold_segmentation(hierarchy, threshold)
    if chosen.max() > 65535:
        raise ShapeError(f"{int(chosen.max()) + 1} regions do not fit a 16-bit label map")
    bg = background if background is not None else np.zeros(hierarchy.shape)
    written = [
        atomic_write_text(out / "merges.txt", format_merges(hierarchy)),
        write_pgm(out / "labels.pgm", hierarchy.labels, sixteen_bit=True),
        write_pgm(out / "segments.pgm", chosen, sixteen_bit=True),
        write_pfm(out / "ucm.pfm", ucm),
        write_ppm(out / "overlay.ppm", overlay(bg, ucm)),
    ]
    logger.info("Wrote segmentation of %d regions to %s", hierarchy.n_regions, out)
    return written


def parse_merges(text: str, path: str | Path = "merges.txt") -> tuple[int, tuple[Merge, ...]]:
    """
    Parse a merges.txt listing.

    Raises:
        ParseError: On a missing header or malformed merge line
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# regions "):
        raise ParseError("missing '# regions N' header", path, 1)
    try:
        n_regions = int(lines[0].split()[2])
    except (IndexError, ValueError) as e:
        raise ParseError(f"bad header {lines[0]!r}", path, 1) from e

    merges = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4 or parts[0] != "merge":
            raise ParseError(f"expected 'merge a b strength', got {line!r}", path, number)
        try:
            merge = Merge(int(parts[1]), int(parts[2]), float(parts[3]))
        except ValueError as e:
            raise ParseError(f"bad merge values in {line!r}", path, number) from e
        if max(merge.a, merge.b) >= n_regions + len(merges):
            raise ParseError(f"merge references unknown cluster in {line!r}", path, number)
        merges.append(merge)
    return n_regions, tuple(merges)


def load_hierarchy(folder: str | Path) -> SegmentationHierarchy:
    """
    Rebuild a hierarchy from labels.pgm and merges.txt.

    Crack values are not stored, so arcs carry zero strength; thresholding
    and UCM queries only need the merge tree.
    """
    root = Path(folder)
    labels = read_pnm(root / "labels.pgm").astype(np.int64)
    merges_path = root / "merges.txt"
    try:
        text = merges_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read merges: {e}", merges_path) from e
    n_regions, merges = parse_merges(text, merges_path)
    if labels.ndim != 2 or labels.max(initial=-1) >= n_regions:
        raise ParseError(f"labels exceed the {n_regions} regions in merges.txt", root / "labels.pgm")

    cracks = find_cracks(labels, np.zeros(labels.shape))
    arcs = _group_arcs(cracks)
    base = SegmentationHierarchy(labels=labels, n_regions=n_regions, cracks=cracks, arcs=arcs)
    return replace(base, merges=merges, segments=_segments_for(base, merges))


def _segments_for(base: SegmentationHierarchy, merges: tuple[Merge, ...]) -> tuple[np.ndarray, ...]:
    """Crack indices separating the two clusters of each merge."""
    cluster = np.arange(base.n_regions)
    segments = []
    regions = base.cracks.regions
    for i, m in enumerate(merges):
        side_a = cluster == m.a
        side_b = cluster == m.b
        crosses = (side_a[regions[:, 0]] & side_b[regions[:, 1]]) | (side_b[regions[:, 0]] & side_a[regions[:, 1]])
        segments.append(np.flatnonzero(crosses))
        cluster[side_a | side_b] = base.n_regions + i
    return tuple(segments)
