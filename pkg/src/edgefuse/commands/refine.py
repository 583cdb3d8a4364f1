"""`edgefuse refine`: edge-guided disparity refinement."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from edgefuse.refiner import multiscale_refine, write_report
from edgefuse.utils.errors import InputError, ShapeError
from edgefuse.utils.formats import read_pfm_array, write_pfm
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext

logger = get_logger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "refine",
        help="refine a disparity map along predicted contours",
        description=(
            "Solve the edge-constrained least-squares refinement coarse to fine and write the "
            "refined disparity plus a per-level objective report."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--disparity", type=Path, required=True, help="initial disparity PFM")
    parser.add_argument("--contour", type=Path, required=True, help="contour probability PFM")
    parser.add_argument("--directions", type=Path, required=True, help="direction PFM (du, dv in channels 0, 1)")
    parser.add_argument("--out", type=Path, required=True, help="refined disparity PFM")
    parser.add_argument("--report", type=Path, default=None, help="report path (default: OUT with .txt)")
    parser.add_argument("--mu", type=float, default=None, help="override refine.mu")
    parser.add_argument("--levels", type=int, default=None, help="override refine.levels")
    parser.set_defaults(handler=handle)


def _single(path: Path) -> np.ndarray:
    arr = read_pfm_array(path)
    if arr.shape[2] != 1:
        raise InputError(f"{path}: expected one channel, got {arr.shape[2]}")
    return arr[:, :, 0].astype(np.float64)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    config = context.run_config.refine
    if args.mu is not None:
        config = replace(config, mu=args.mu)
    if args.levels is not None:
        config = replace(config, levels=args.levels)

    x0 = _single(args.disparity)
    contour = _single(args.contour)
    directions = read_pfm_array(args.directions).astype(np.float64)
    if directions.shape[2] < 2:
        raise InputError(f"{args.directions}: direction file needs two channels")
    for path, arr in ((args.contour, contour), (args.directions, directions)):
        if arr.shape[:2] != x0.shape:
            raise ShapeError(f"{path}: size {arr.shape[:2]} differs from disparity {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise InputError(f"{args.disparity}: disparity holds non-finite values")

    result = multiscale_refine(x0, contour, directions[:, :, 0], directions[:, :, 1], config)
    write_pfm(args.out, result.x.astype(np.float32))
    write_report(args.report or args.out.with_suffix(".txt"), result)
    if not result.converged:
        logger.warning("Refinement stopped early on at least one level; see the report")
