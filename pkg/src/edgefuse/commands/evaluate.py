"""`edgefuse eval`: boundary PR curves and the ODS/OIS table."""

from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path
from typing import TYPE_CHECKING

from edgefuse.dataset import load_manifest
from edgefuse.evaluator import OdsOis, evaluate, format_summary, write_curve
from edgefuse.segmenter import load_hierarchy
from edgefuse.utils.errors import InputError
from edgefuse.utils.formats import atomic_write_text, read_pfm_array
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext

logger = get_logger(__name__)

SUMMARY_FILE = "summary.txt"


def _method(text: str) -> tuple[str, Path]:
    name, sep, folder = text.partition("=")
    if not sep or not name or not folder:
        raise argparse.ArgumentTypeError(f"expected NAME=DIR, got {text!r}")
    return name, Path(folder)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "eval",
        help="evaluate segmentation hierarchies against ground truth",
        description=(
            "For every method, read <DIR>/<scene>/labels.pgm and merges.txt for each dataset scene "
            "from --start on, compare boundaries with edges_gt.pfm and write <name>.csv plus "
            f"{SUMMARY_FILE}."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--dataset", type=Path, required=True, help="dataset directory with ground truth")
    parser.add_argument(
        "--method",
        type=_method,
        action="append",
        required=True,
        metavar="NAME=DIR",
        help="segmentation folder of one method; repeat to compare methods",
    )
    parser.add_argument("--start", type=int, default=0, help="first dataset scene to evaluate")
    parser.add_argument("--slack", type=int, default=None, help="override eval.slack_radius")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    config = context.run_config.eval
    if args.slack is not None:
        config = replace(config, slack_radius=args.slack)

    manifest = load_manifest(args.dataset)
    entries = manifest.entries[args.start :]
    if not entries:
        raise InputError(f"{args.dataset}: no scenes at or after index {args.start}")
    gt_edges = [read_pfm_array(manifest.folder(e) / "edges_gt.pfm")[:, :, 0] for e in entries]

    results: dict[str, OdsOis] = {}
    for name, folder in args.method:
        if name in results:
            raise InputError(f"method {name!r} given twice")
        hierarchies = [load_hierarchy(folder / e.name) for e in entries]
        results[name] = evaluate(hierarchies, gt_edges, config)
        write_curve(args.out / f"{name}.csv", results[name].curve)

    table = format_summary(results)
    atomic_write_text(args.out / SUMMARY_FILE, table)
    print(table, end="")
