"""`edgefuse train`: fit the fusion network on a generated dataset."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from edgefuse.dataset import load_manifest
from edgefuse.net.model import save_model
from edgefuse.net.training import train, write_loss_log
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext

logger = get_logger(__name__)

MODEL_FILE = "model.dcut"
LOSS_FILE = "loss.csv"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "train",
        help="train the fusion network",
        description=(
            f"Train on a dataset from `gen` and write {MODEL_FILE} plus {LOSS_FILE}. "
            "Architecture and training knobs come from the arch.* and train.* config keys."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--dataset", type=Path, required=True, help="dataset directory")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--epochs", type=int, default=None, help="override train.epochs")
    parser.add_argument("--seed", type=int, default=None, help="override train.seed")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    rc = context.run_config
    config = rc.train
    if args.epochs is not None:
        config = replace(config, epochs=args.epochs)
    if args.seed is not None:
        config = replace(config, seed=args.seed)

    manifest = load_manifest(args.dataset)
    result = train(manifest, rc.arch, config)
    save_model(args.out / MODEL_FILE, result.params)
    write_loss_log(args.out / LOSS_FILE, result.log)
    logger.info("Wrote %s and %s to %s", MODEL_FILE, LOSS_FILE, args.out)
