"""`edgefuse segment`: segmentation hierarchies from edge maps."""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from edgefuse.segmenter import SegmentConfig, segment, write_outputs
from edgefuse.utils.errors import InputError
from edgefuse.utils.formats import read_color, read_pfm_array
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "segment",
        help="build segmentation hierarchies",
        description=(
            "Watershed, agglomerate and strengthen an edge map. Writes merges.txt, labels.pgm, "
            "segments.pgm, ucm.pfm and overlay.ppm."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--edges", type=Path, help="single edge probability PFM")
    source.add_argument("--input", type=Path, help="directory of scene folders, each holding --name")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--name", default="edges.pfm", help="edge file inside each scene folder")
    parser.add_argument("--color", type=Path, default=None, help="overlay background for --edges")
    parser.add_argument(
        "--dataset",
        type=Path,
        default=None,
        help="dataset whose color.ppm files serve as overlay backgrounds for --input",
    )
    parser.add_argument("--threshold", type=float, default=None, help="override segment.threshold")
    parser.set_defaults(handler=handle)


def segment_file(edges_path: Path, out: Path, config: SegmentConfig, color_path: Path | None) -> Path:
    """Segment one edge map and write its outputs; returns the output folder."""
    edge_prob = read_pfm_array(edges_path)
    if edge_prob.ndim == 3:
        if edge_prob.shape[2] != 1:
            raise InputError(f"{edges_path}: edge map must have one channel, got {edge_prob.shape[2]}")
        edge_prob = edge_prob[:, :, 0]
    background = None
    if color_path is not None and color_path.is_file():
        background = read_color(color_path).data
        if background.shape[:2] != edge_prob.shape:
            raise InputError(f"{color_path}: size {background.shape[:2]} differs from edges {edge_prob.shape}")
    hierarchy = segment(edge_prob, config)
    write_outputs(out, hierarchy, config.threshold, background if background is not None else edge_prob)
    return out


def _segment_job(job: tuple[Path, Path, SegmentConfig, Path | None]) -> Path:
    return segment_file(*job)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    config = context.run_config.segment
    if args.threshold is not None:
        config = replace(config, threshold=args.threshold)

    if args.edges is not None:
        segment_file(args.edges, args.out, config, args.color)
        return

    folders = sorted(p for p in args.input.iterdir() if (p / args.name).is_file())
    if not folders:
        raise InputError(f"{args.input}: no scene folders contain {args.name}")
    jobs = [
        (
            folder / args.name,
            args.out / folder.name,
            config,
            args.dataset / folder.name / "color.ppm" if args.dataset else None,
        )
        for folder in folders
    ]
    if context.config.jobs > 1:
        with ProcessPoolExecutor(max_workers=context.config.jobs) as pool:
            list(pool.map(_segment_job, jobs))
    else:
        for job in jobs:
            _segment_job(job)
    logger.info("Segmented %d scenes into %s", len(jobs), args.out)
