"""`edgefuse infer`: depth-edge maps from a trained model or a baseline."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from edgefuse.dataset import load_manifest
from edgefuse.evaluator import BaselineMode, baseline_fuse
from edgefuse.imaging import ImageKind, MultiChannelImage
from edgefuse.net.model import NetworkParameters, OutputHead, load_model
from edgefuse.net.training import assemble_input, infer
from edgefuse.utils.errors import InputError
from edgefuse.utils.formats import read_color, read_pfm, write_pfm
from edgefuse.utils.logging import get_logger

if TYPE_CHECKING:
    from edgefuse.cli import CommandContext
    from edgefuse.ground_truth import GroundTruthConfig

logger = get_logger(__name__)

_INPUT_FILES = {"color": "color.ppm", "disparity": "disp_est.pfm", "normals": "normals_est.pfm"}


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "infer",
        help="predict depth edges for scenes",
        description=(
            "Read color.ppm, disp_est.pfm and normals_est.pfm from a scene folder (or every scene "
            "of a dataset) and write edges.pfm, or contour.pfm and directions.pfm for a "
            "contour+direction model."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scene", type=Path, help="single scene folder")
    source.add_argument("--dataset", type=Path, help="dataset directory; one output folder per scene")
    parser.add_argument("--start", type=int, default=0, help="first dataset scene to process")
    method = parser.add_mutually_exclusive_group(required=True)
    method.add_argument("--model", type=Path, help="model file from `train`")
    method.add_argument(
        "--baseline",
        choices=[m.value for m in BaselineMode],
        help="hand-designed fusion instead of a model",
    )
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.set_defaults(handler=handle)


def _load_inputs(folder: Path, names: tuple[str, ...]) -> dict[str, MultiChannelImage]:
    missing = [_INPUT_FILES[n] for n in names if not (folder / _INPUT_FILES[n]).is_file()]
    if missing:
        raise InputError(f"{folder}: missing {', '.join(missing)}")
    loaded: dict[str, MultiChannelImage] = {}
    for name in names:
        path = folder / _INPUT_FILES[name]
        if name == "color":
            loaded[name] = read_color(path)
        else:
            kind = ImageKind.DISPARITY if name == "disparity" else ImageKind.NORMALS
            loaded[name] = read_pfm(path, kind)
    return loaded


def predict_scene(
    folder: Path,
    out: Path,
    params: NetworkParameters | None,
    baseline: BaselineMode | None,
    gt_config: GroundTruthConfig,
    sigma: float = 2.0,
) -> list[Path]:
    """Write the prediction for one scene folder into `out`."""
    if baseline is not None:
        images = _load_inputs(folder, ("color", "disparity", "normals"))
        edges = baseline_fuse(
            baseline,
            images["color"],
            images["disparity"],
            images["normals"],
            gt_config,
            sigma,
        )
        return [write_pfm(out / "edges.pfm", edges.image)]

    assert params is not None
    arch = params.config
    images = _load_inputs(folder, arch.inputs)
    x = assemble_input(arch.inputs, **{name: img.data for name, img in images.items()})
    y = infer(params, x)
    if arch.head is OutputHead.EDGE:
        return [write_pfm(out / "edges.pfm", y[0])]
    return [
        write_pfm(out / "contour.pfm", y[0]),
        write_pfm(out / "directions.pfm", np.stack([y[1], y[2]], axis=2)),
    ]


def handle(args: argparse.Namespace, context: CommandContext) -> None:
    rc = context.run_config
    params = None
    baseline = BaselineMode(args.baseline) if args.baseline else None
    if args.model is not None:
        params = load_model(args.model, rc.arch if context.config_given else None)

    if args.scene is not None:
        predict_scene(args.scene, args.out, params, baseline, rc.gt, rc.eval.baseline_sigma)
        logger.info("Wrote prediction for %s to %s", args.scene, args.out)
        return

    manifest = load_manifest(args.dataset)
    entries = manifest.entries[args.start :]
    if not entries:
        raise InputError(f"{args.dataset}: no scenes at or after index {args.start}")
    for entry in entries:
        predict_scene(manifest.folder(entry), args.out / entry.name, params, baseline, rc.gt, rc.eval.baseline_sigma)
    logger.info("Wrote predictions for %d scenes to %s", len(entries), args.out)
