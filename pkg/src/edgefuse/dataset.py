"""
Synthetic dataset generation and loading.

A dataset is a directory of scene folders plus an index:

    index.txt
    scene_0000/color.ppm
    scene_0000/disp_gt.pfm
    scene_0000/disp_est.pfm
    scene_0000/normals_gt.pfm
    scene_0000/normals_est.pfm
    scene_0000/edges_gt.pfm
    scene_0000/mask.pfm

index.txt lists one `scene_NNNN seed` pair per line after a header
comment carrying the canvas size.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from edgefuse.ground_truth import GroundTruthConfig, make_ground_truth
from edgefuse.imaging import ImageKind, MultiChannelImage, resize_to_width
from edgefuse.net.loss import make_mask
from edgefuse.scenes import CorruptionSpec, SceneConfig, corrupt, random_scene, render
from edgefuse.utils.errors import InputError, ParseError
from edgefuse.utils.formats import atomic_write_text, read_color, read_pfm, write_pfm, write_ppm
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

INDEX_FILE = "index.txt"
INDEX_HEADER = "# edgefuse dataset v1"

SCENE_FILES = (
    "color.ppm",
    "disp_gt.pfm",
    "disp_est.pfm",
    "normals_gt.pfm",
    "normals_est.pfm",
    "edges_gt.pfm",
    "mask.pfm",
)

# Corruption seeds are derived from scene seeds so layout and noise streams differ
_NOISE_SEED_OFFSET = 0x5EED


@dataclass(frozen=True)
class SceneEntry:
    name: str
    seed: int


@dataclass(frozen=True)
class DatasetManifest:
    """Index of a generated dataset."""

    root: Path
    entries: tuple[SceneEntry, ...]
    width: int
    height: int

    def __len__(self) -> int:
        return len(self.entries)

    def folder(self, entry: SceneEntry) -> Path:
        return self.root / entry.name

    def split(self, val_fraction: float) -> tuple[tuple[SceneEntry, ...], tuple[SceneEntry, ...]]:
        """
        Hold out the last ceil(val_fraction * n) scenes for validation.

        Returns:
            tuple: (training entries, validation entries)
        """
        if not 0.0 <= val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in [0, 1), got {val_fraction}")
        n_val = math.ceil(val_fraction * len(self.entries))
        if n_val >= len(self.entries) and n_val > 0:
            n_val = len(self.entries) - 1
        cut = len(self.entries) - n_val
        return self.entries[:cut], self.entries[cut:]


@dataclass(frozen=True, eq=False)
class SceneBundle:
    """All images of one scene folder."""

    name: str
    color: MultiChannelImage
    disparity_gt: MultiChannelImage
    disparity_est: MultiChannelImage
    normals_gt: MultiChannelImage
    normals_est: MultiChannelImage
    edges_gt: MultiChannelImage
    mask: MultiChannelImage

    @property
    def width(self) -> int:
        return self.color.width

    @property
    def height(self) -> int:
        return self.color.height

    @classmethod
    def load(cls, folder: str | Path) -> SceneBundle:
        """
        Load a scene folder.

        Raises:
            InputError: If any of the scene files is missing
            ParseError: If a file is malformed
        """
        path = Path(folder)
        missing = [name for name in SCENE_FILES if not (path / name).is_file()]
        if missing:
            raise InputError(f"{path}: incomplete scene, missing {', '.join(missing)}")
        bundle = cls(
            name=path.name,
            color=read_color(path / "color.ppm"),
            disparity_gt=read_pfm(path / "disp_gt.pfm", ImageKind.DISPARITY),
            disparity_est=read_pfm(path / "disp_est.pfm", ImageKind.DISPARITY),
            normals_gt=read_pfm(path / "normals_gt.pfm", ImageKind.NORMALS),
            normals_est=read_pfm(path / "normals_est.pfm", ImageKind.NORMALS),
            edges_gt=read_pfm(path / "edges_gt.pfm", ImageKind.PROBABILITY),
            mask=read_pfm(path / "mask.pfm"),
        )
        shapes = {img.shape[:2] for img in bundle.images()}
        if len(shapes) != 1:
            raise InputError(f"{path}: scene images disagree in size: {sorted(shapes)}")
        return bundle

    def images(self) -> tuple[MultiChannelImage, ...]:
        return (
            self.color,
            self.disparity_gt,
            self.disparity_est,
            self.normals_gt,
            self.normals_est,
            self.edges_gt,
            self.mask,
        )

    def resized(self, target_width: int) -> SceneBundle:
        """Shrink every channel to `target_width`; the mask is re-binarized."""
        if target_width >= self.width:
            return self
        mask = resize_to_width(self.mask, target_width).data[:, :, 0]
        high = float(self.mask.data.max())
        return SceneBundle(
            name=self.name,
            color=resize_to_width(self.color, target_width),
            disparity_gt=resize_to_width(self.disparity_gt, target_width),
            disparity_est=resize_to_width(self.disparity_est, target_width),
            normals_gt=resize_to_width(self.normals_gt, target_width),
            normals_est=resize_to_width(self.normals_est, target_width),
            edges_gt=resize_to_width(self.edges_gt, target_width),
            mask=MultiChannelImage(np.where(mask > (1.0 + high) / 2.0, high, 1.0)),
        )


def generate_scene(
    folder: Path,
    seed: int,
    scene: SceneConfig,
    corruption: CorruptionSpec,
    gt: GroundTruthConfig,
) -> Path:
    """
    Render, corrupt and label one scene into `folder`.

    Returns:
        Path: The scene folder
    """
    truth = render(random_scene(scene, seed))
    estimates = corrupt(truth, corruption, seed + _NOISE_SEED_OFFSET)
    ground_truth = make_ground_truth(truth.disparity, truth.normals, truth.camera, gt)
    mask = make_mask(estimates.color, ground_truth.edge.values)

    write_ppm(folder / "color.ppm", estimates.color)
    write_pfm(folder / "disp_gt.pfm", truth.disparity)
    write_pfm(folder / "disp_est.pfm", estimates.disparity)
    write_pfm(folder / "normals_gt.pfm", truth.normals)
    write_pfm(folder / "normals_est.pfm", estimates.normals)
    write_pfm(folder / "edges_gt.pfm", ground_truth.edge.image)
    write_pfm(folder / "mask.pfm", mask)
    return folder


def _generate_job(args: tuple[Path, int, SceneConfig, CorruptionSpec, GroundTruthConfig]) -> Path:
    return generate_scene(*args)


def make_dataset(
    out_dir: str | Path,
    n_scenes: int,
    scene: SceneConfig | None = None,
    corruption: CorruptionSpec | None = None,
    gt: GroundTruthConfig | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> DatasetManifest:
    """
    Generate `n_scenes` scene folders and the dataset index.

    Scene i uses seed `seed + i`, so regenerating with the same seed gives
    byte-identical files regardless of `jobs`.

    Args:
        out_dir: Dataset root, created if needed
        n_scenes: Number of scenes, at least 1
        scene: Canvas and layout knobs
        corruption: Estimate corruption magnitudes
        gt: Ground-truth recipe
        seed: Base seed
        jobs: Worker processes

    Returns:
        DatasetManifest: Index of the written dataset

    Raises:
        ValueError: If n_scenes < 1
        InputError: If the directory cannot be written
    """
    if n_scenes < 1:
        raise ValueError(f"n_scenes must be >= 1, got {n_scenes}")
    scene = scene or SceneConfig()
    corruption = corruption or CorruptionSpec()
    gt = gt or GroundTruthConfig()
    root = Path(out_dir)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"{root}: cannot create dataset directory: {e}") from e

    entries = tuple(SceneEntry(name=f"scene_{i:04d}", seed=seed + i) for i in range(n_scenes))
    work = [(root / e.name, e.seed, scene, corruption, gt) for e in entries]

    logger.info("Generating %d scenes (%dx%d) in %s with %d job(s)", n_scenes, scene.width, scene.height, root, jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, folder in enumerate(pool.map(_generate_job, work), start=1):
                logger.debug("Scene %d/%d written: %s", done, n_scenes, folder.name)
    else:
        for done, job in enumerate(work, start=1):
            _generate_job(job)
            logger.debug("Scene %d/%d written: %s", done, n_scenes, job[0].name)

    manifest = DatasetManifest(root=root, entries=entries, width=scene.width, height=scene.height)
    write_index(manifest)
    logger.info("Dataset ready: %d scenes", n_scenes)
    return manifest


def write_index(manifest: DatasetManifest) -> Path:
    lines = [INDEX_HEADER, f"# canvas {manifest.width} {manifest.height}"]
    lines += [f"{e.name} {e.seed}" for e in manifest.entries]
    return atomic_write_text(manifest.root / INDEX_FILE, "\n".join(lines) + "\n")


def load_manifest(root: str | Path) -> DatasetManifest:
    """
    Read a dataset index and check that every listed folder is complete.

    Raises:
        InputError: If the index or a scene file is missing
        ParseError: If an index line is malformed
    """
    base = Path(root)
    index = base / INDEX_FILE
    try:
        text = index.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise InputError(f"{index}: dataset index not found") from e

    width = height = 0
    entries: list[SceneEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            parts = stripped[1:].split()
            if len(parts) == 3 and parts[0] == "canvas":
                try:
                    width, height = int(parts[1]), int(parts[2])
                except ValueError as e:
                    raise ParseError(f"bad canvas line {stripped!r}", index, lineno) from e
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'folder seed', got {stripped!r}", index, lineno)
        try:
            entries.append(SceneEntry(name=parts[0], seed=int(parts[1])))
        except ValueError as e:
            raise ParseError(f"bad seed {parts[1]!r}", index, lineno) from e

    if not entries:
        raise InputError(f"{index}: dataset lists no scenes")
    for entry in entries:
        missing = [name for name in SCENE_FILES if not (base / entry.name / name).is_file()]
        if missing:
            raise InputError(f"{base / entry.name}: incomplete scene, missing {', '.join(missing)}")
    return DatasetManifest(root=base, entries=tuple(entries), width=width, height=height)
