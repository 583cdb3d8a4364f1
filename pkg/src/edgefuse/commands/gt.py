"""`edgefuse gt`: analytic edge probabilities from clean disparity."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from edgefuse.ground_truth import discontinuity_contours, make_ground_truth
from edgefuse.imaging import ImageKind
from edgefuse.utils.errors import InputError
from edgefuse.utils.formats import read_calibration, read_pfm, write_pfm
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "gt",
        help="compute ground-truth edge maps",
        description=(
            "Write contour.pfm, crease.pfm and edges.pfm for a clean disparity map. Normals come "
            "from --normals or are reconstructed with the --calib intrinsics."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--disparity", type=Path, required=True, help="clean disparity PFM")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--normals", type=Path, help="clean normals PFM (3 channels)")
    source.add_argument("--calib", type=Path, help="calib.txt with cam0, baseline and doffs")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument(
        "--directions",
        action="store_true",
        help="also write discontinuities.pfm and directions.pfm for refinement",
    )
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    cfg = context.run_config.gt
    disparity = read_pfm(args.disparity, ImageKind.DISPARITY)
    if disparity.channels != 1:
        raise InputError(f"{args.disparity}: disparity must have one channel, got {disparity.channels}")

    normals = read_pfm(args.normals, ImageKind.NORMALS) if args.normals else None
    camera = read_calibration(args.calib) if args.calib else None
    if normals is not None and normals.shape != disparity.shape:
        raise InputError(f"{args.normals}: size {normals.shape} differs from disparity {disparity.shape}")

    truth = make_ground_truth(disparity, normals=normals, camera=camera, config=cfg)
    truth.write(args.out)

    if args.directions:
        mask, du, dv = discontinuity_contours(disparity, cfg.jump)
        write_pfm(args.out / "discontinuities.pfm", mask.astype(np.float32))
        write_pfm(args.out / "directions.pfm", np.stack([du, dv], axis=2))
        logger.info("Wrote %d discontinuity pixels with directions", int(mask.sum()))
