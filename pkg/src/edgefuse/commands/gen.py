"""`edgefuse gen`: render, corrupt and label a synthetic dataset."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from edgefuse.dataset import make_dataset

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "gen",
        help="generate a synthetic dataset",
        description="Render random scenes, corrupt them into estimates and write ground-truth edges.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--out", type=Path, required=True, help="dataset directory")
    parser.add_argument("--scenes", type=int, default=16, help="number of scenes")
    parser.add_argument("--width", type=int, default=None, help="canvas width (default: scene.width)")
    parser.add_argument("--height", type=int, default=None, help="canvas height (default: scene.height)")
    parser.add_argument("--seed", type=int, default=0, help="base seed; scene i uses seed + i")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    rc = context.run_config
    scene = rc.scene
    if args.width is not None or args.height is not None:
        scene = replace(scene, width=args.width or scene.width, height=args.height or scene.height)
    make_dataset(
        args.out,
        args.scenes,
        scene=scene,
        corruption=rc.corrupt,
        gt=rc.gt,
        seed=args.seed,
        jobs=context.config.jobs,
    )
