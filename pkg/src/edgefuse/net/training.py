"""
Training and inference for the fusion network.

Provides:
- Input assembly and normalization of color, disparity and normals
- Edge and contour+direction training targets
- Patch sampling with exposure jitter
- Adam and Nesterov momentum updates
- The epoch loop with validation, NaN diagnostics and a CSV loss log
- Padded whole-image inference
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from edgefuse.dataset import DatasetManifest, SceneBundle, SceneEntry
from edgefuse.ground_truth import discontinuity_contours
from edgefuse.net.loss import masked_loss, masked_loss_grad
from edgefuse.net.model import (
    ArchitectureConfig,
    NetworkParameters,
    OutputHead,
    backward,
    first_nonfinite_layer,
    forward,
    l2_penalty,
)
from edgefuse.utils.errors import ConfigMismatchError, NumericError, ShapeError
from edgefuse.utils.formats import atomic_write_text
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

DIRECTION_THRESHOLD = 0.5


class Optimizer(Enum):
    ADAM = "adam"
    NESTEROV = "nesterov"


@dataclass(frozen=True)
class TrainConfig:
    """
    Training knobs (`train.*` in a run config).

    Attributes:
        patch_size: Side of the square training crops
        batch_size: Crops per update
        learning_rate: Step size
        beta1: Adam first-moment decay
        beta2: Adam second-moment decay
        epsilon: Adam denominator offset
        l2_weight: L2 penalty on kernels and biases
        mask_weight: Mask value at texture edges
        epochs: Passes over the training scenes
        seed: Seed for initialization and sampling
        optimizer: Update rule
        momentum: Nesterov momentum
        exposure_jitter: Color gain is drawn from [1 - j, 1 + j] per crop
        val_fraction: Share of scenes held out for validation
        max_width: Scenes wider than this are shrunk before sampling
        contour_jump: Disparity jump that defines contour targets for the direction head
    """

    patch_size: int = 256
    batch_size: int = 5
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2_weight: float = 1e-5
    mask_weight: float = 10.0
    epochs: int = 30
    seed: int = 0
    optimizer: Optimizer = Optimizer.ADAM
    momentum: float = 0.9
    exposure_jitter: float = 0.1
    val_fraction: float = 0.125
    max_width: int = 800
    contour_jump: float = 1.0

    def __post_init__(self) -> None:
        for name in ("patch_size", "batch_size", "epochs", "max_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("learning_rate", "epsilon", "mask_weight", "contour_jump"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and 0 <= self.momentum < 1):
            raise ValueError("beta1, beta2 and momentum must lie in [0, 1)")
        if self.l2_weight < 0:
            raise ValueError("l2_weight must be >= 0")
        if not 0 <= self.exposure_jitter < 1:
            raise ValueError("exposure_jitter must lie in [0, 1)")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")


# --- Inputs and targets ---


def assemble_input(
    inputs: tuple[str, ...],
    color: np.ndarray | None = None,
    disparity: np.ndarray | None = None,
    normals: np.ndarray | None = None,
) -> np.ndarray:
    """
    Stack the selected channel groups into a (C, H, W) network input.

    Color is scaled to [0, 1], disparity is divided by its image mean and
    normals are used as they are.

    Raises:
        ShapeError: If a selected group is missing or sizes disagree
    """
    planes: list[np.ndarray] = []
    sources = {"color": color, "disparity": disparity, "normals": normals}
    for name in inputs:
        data = sources[name]
        if data is None:
            raise ShapeError(f"network input needs the {name} channel")
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if name == "color":
            arr = arr / 255.0
        elif name == "disparity":
            mean = float(arr.mean())
            arr = arr / mean if mean > 0 else arr
        planes.append(arr.transpose(2, 0, 1))
    shapes = {p.shape[1:] for p in planes}
    if len(shapes) != 1:
        raise ShapeError(f"input channels disagree in size: {sorted(shapes)}")
    return np.concatenate(planes, axis=0)


@dataclass(frozen=True, eq=False)
class SceneTensors:
    """Whole-scene network input, target and mask, all (C, H, W)."""

    name: str
    x: np.ndarray
    target: np.ndarray
    mask: np.ndarray

    @property
    def height(self) -> int:
        return int(self.x.shape[1])

    @property
    def width(self) -> int:
        return int(self.x.shape[2])


def prepare_scene(
    bundle: SceneBundle, arch: ArchitectureConfig, contour_jump: float = 1.0, mask_weight: float | None = None
) -> SceneTensors:
    """
    Build input, target and mask tensors for one scene.

    The edge head regresses the ground-truth edge probability under the
    texture mask, re-weighted to `mask_weight` when given. The
    contour+direction head regresses discontinuity contours and their unit
    uphill directions; direction errors only count at contour pixels.
    """
    x = assemble_input(
        arch.inputs,
        color=bundle.color.data,
        disparity=bundle.disparity_est.data,
        normals=bundle.normals_est.data,
    )
    mask = bundle.mask.plane(0)
    if mask_weight is not None:
        mask = np.where(mask > 1.0, mask_weight, 1.0)
    if arch.head is OutputHead.EDGE:
        target = bundle.edges_gt.plane(0)[np.newaxis]
        weights = mask[np.newaxis]
    else:
        contour, du, dv = discontinuity_contours(bundle.disparity_gt, contour_jump)
        on = contour.astype(np.float64)
        target = np.stack([on, du, dv])
        weights = np.stack([mask, on, on])
    return SceneTensors(name=bundle.name, x=x, target=target, mask=weights)


@dataclass(frozen=True, eq=False)
class TrainingExample:
    x: np.ndarray
    target: np.ndarray
    mask: np.ndarray


def patch_offsets(height: int, width: int, patch_size: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform top-left corner of a patch that fits inside the image."""
    top = int(rng.integers(0, height - patch_size + 1))
    left = int(rng.integers(0, width - patch_size + 1))
    return top, left


def sample_patch(
    scene: SceneTensors,
    patch_size: int,
    rng: np.random.Generator,
    exposure_jitter: float = 0.0,
    color_channels: int = 0,
) -> TrainingExample:
    """
    Crop an aligned random patch of input, target and mask.

    Args:
        scene: Whole-scene tensors
        patch_size: Patch side
        rng: Sampling generator; offsets are drawn first, then the color gain
        exposure_jitter: Color gain range around 1
        color_channels: Number of leading input channels holding color

    Raises:
        ShapeError: If the scene is smaller than the patch
    """
    if scene.height < patch_size or scene.width < patch_size:
        raise ShapeError(
            f"scene {scene.name} is {scene.width}x{scene.height}, smaller than patch {patch_size}; "
            "regenerate with a larger canvas or lower train.patch_size"
        )
    top, left = patch_offsets(scene.height, scene.width, patch_size, rng)
    window = (slice(None), slice(top, top + patch_size), slice(left, left + patch_size))
    x = scene.x[window].copy()
    if exposure_jitter > 0 and color_channels:
        x[:color_channels] *= rng.uniform(1.0 - exposure_jitter, 1.0 + exposure_jitter)
    return TrainingExample(x=x, target=scene.target[window].copy(), mask=scene.mask[window].copy())


def center_patch(scene: SceneTensors, patch_size: int) -> TrainingExample:
    top = (scene.height - patch_size) // 2
    left = (scene.width - patch_size) // 2
    window = (slice(None), slice(top, top + patch_size), slice(left, left + patch_size))
    return TrainingExample(x=scene.x[window], target=scene.target[window], mask=scene.mask[window])


# --- Optimizers ---


@dataclass
class OptimizerState:
    """Moment estimates, one array per trainable tensor."""

    step: int
    first: list[np.ndarray]
    second: list[np.ndarray]

    @classmethod
    def zeros(cls, tensors: list[np.ndarray]) -> OptimizerState:
        return cls(step=0, first=[np.zeros_like(t) for t in tensors], second=[np.zeros_like(t) for t in tensors])


def adam_step(
    tensors: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState, config: TrainConfig
) -> list[np.ndarray]:
    """
    Bias-corrected Adam update, applied in place.

    Returns:
        list: The updated tensors
    """
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.step
    correction2 = 1.0 - b2**state.step
    for t, g, m, v in zip(tensors, grads, state.first, state.second, strict=True):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        t -= config.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + config.epsilon)
    return tensors


def nesterov_step(
    tensors: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState, config: TrainConfig
) -> list[np.ndarray]:
    """Nesterov momentum update in the look-ahead-free form, applied in place."""
    state.step += 1
    mu = config.momentum
    for t, g, velocity in zip(tensors, grads, state.first, strict=True):
        previous = velocity.copy()
        velocity *= mu
        velocity -= config.learning_rate * g
        t += -mu * previous + (1.0 + mu) * velocity
    return tensors


# --- Training loop ---


@dataclass(frozen=True)
class EpochLoss:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainingResult:
    params: NetworkParameters
    log: list[EpochLoss]


def _stack(examples: list[TrainingExample]) -> TrainingExample:
    return TrainingExample(
        x=np.stack([e.x for e in examples]),
        target=np.stack([e.target for e in examples]),
        mask=np.stack([e.mask for e in examples]),
    )


def evaluate_loss(params: NetworkParameters, examples: list[TrainingExample]) -> float:
    """Mean inference-mode data loss over fixed examples."""
    if not examples:
        return float("nan")
    losses = []
    for example in examples:
        pred, _ = forward(params, example.x[np.newaxis], training=False)
        losses.append(masked_loss(pred[0], example.target, example.mask))
    return float(np.mean(losses))


def training_step(
    params: NetworkParameters,
    batch: TrainingExample,
    state: OptimizerState,
    config: TrainConfig,
) -> float:
    """
    One forward/backward/update cycle.

    Returns:
        float: Data loss of the batch before the update

    Raises:
        NumericError: If the loss is not finite
    """
    pred, cache = forward(params, batch.x, training=True)
    assert cache is not None
    data_loss = masked_loss(pred, batch.target, batch.mask)
    total = data_loss + l2_penalty(params, config.l2_weight)
    if not math.isfinite(total):
        layer = first_nonfinite_layer(params, cache) or "output"
        raise NumericError(f"loss is {total} at step {state.step + 1}; first non-finite values in layer {layer}")

    grads = backward(params, cache, masked_loss_grad(pred, batch.target, batch.mask), config.l2_weight)
    tensors = params.trainable()
    if config.optimizer is Optimizer.ADAM:
        adam_step(tensors, grads.tensors, state, config)
    else:
        nesterov_step(tensors, grads.tensors, state, config)
    return data_loss


def _load_scenes(
    manifest: DatasetManifest, entries: tuple[SceneEntry, ...], arch: ArchitectureConfig, config: TrainConfig
) -> list[SceneTensors]:
    scenes = []
    for entry in entries:
        bundle = SceneBundle.load(manifest.folder(entry)).resized(config.max_width)
        scenes.append(prepare_scene(bundle, arch, config.contour_jump, config.mask_weight))
    return scenes


def train(manifest: DatasetManifest, arch: ArchitectureConfig, config: TrainConfig) -> TrainingResult:
    """
    Train a network on a generated dataset.

    The last ceil(val_fraction * n) scenes are held out. Validation and the
    epoch-0 baseline use fixed center crops in inference mode.

    Args:
        manifest: Dataset index
        arch: Network topology
        config: Training knobs

    Returns:
        TrainingResult: Trained parameters and per-epoch losses (epoch 0 is before any update)

    Raises:
        ShapeError: If the patch size does not fit the network or the scenes
        NumericError: If a loss turns non-finite
    """
    if config.patch_size < arch.multiple or config.patch_size % arch.multiple:
        raise ShapeError(f"train.patch_size {config.patch_size} must be a multiple of 2^{arch.n_enc} = {arch.multiple}")

    rng = np.random.default_rng(config.seed)
    train_entries, val_entries = manifest.split(config.val_fraction)
    train_scenes = _load_scenes(manifest, train_entries, arch, config)
    val_scenes = _load_scenes(manifest, val_entries, arch, config)
    for scene in train_scenes + val_scenes:
        if scene.height < config.patch_size or scene.width < config.patch_size:
            raise ShapeError(
                f"scene {scene.name} is {scene.width}x{scene.height}, smaller than patch {config.patch_size}; "
                "regenerate with a larger canvas or lower train.patch_size"
            )

    params = NetworkParameters.init(arch, rng)
    state = OptimizerState.zeros(params.trainable())
    color_channels = 3 if "color" in arch.inputs else 0
    train_probe = [center_patch(s, config.patch_size) for s in train_scenes]
    val_probe = [center_patch(s, config.patch_size) for s in val_scenes]
    if not val_probe:
        logger.warning("No validation scenes held out; validation loss mirrors training loss")

    def _val_loss() -> float:
        return evaluate_loss(params, val_probe) if val_probe else evaluate_loss(params, train_probe)

    log = [EpochLoss(0, evaluate_loss(params, train_probe), _val_loss())]
    logger.info(
        "Training %d parameters on %d scenes (%d held out): initial train %.5f, val %.5f",
        params.parameter_count(),
        len(train_scenes),
        len(val_scenes),
        log[0].train_loss,
        log[0].val_loss,
    )

    steps = max(1, math.ceil(len(train_scenes) / config.batch_size))
    for epoch in range(1, config.epochs + 1):
        losses = []
        for _ in range(steps):
            picks = rng.integers(0, len(train_scenes), size=config.batch_size)
            batch = _stack(
                [
                    sample_patch(train_scenes[i], config.patch_size, rng, config.exposure_jitter, color_channels)
                    for i in picks
                ]
            )
            losses.append(training_step(params, batch, state, config))
        record = EpochLoss(epoch, float(np.mean(losses)), _val_loss())
        log.append(record)
        logger.info("Epoch %d/%d: train %.5f, val %.5f", epoch, config.epochs, record.train_loss, record.val_loss)

    return TrainingResult(params=params, log=log)


def format_loss_log(log: list[EpochLoss]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "val_loss"])
    for record in log:
        writer.writerow([record.epoch, f"{record.train_loss:.8g}", f"{record.val_loss:.8g}"])
    return buf.getvalue()


def write_loss_log(path: str | Path, log: list[EpochLoss]) -> Path:
    """Atomically write `epoch,train_loss,val_loss` CSV."""
    return atomic_write_text(path, format_loss_log(log))


# --- Inference ---


def infer(params: NetworkParameters, x: np.ndarray, expected: ArchitectureConfig | None = None) -> np.ndarray:
    """
    Run the network on one whole image of any size.

    The input is edge-padded at the bottom and right to the next multiple
    of 2^n_enc and the output is cropped back. For the contour+direction
    head, directions are renormalized to unit length where the contour
    probability exceeds 0.5.

    Args:
        params: Trained parameters
        x: (C, H, W) input from assemble_input
        expected: Architecture the caller assembled the input for

    Returns:
        np.ndarray: (head channels, H, W) output

    Raises:
        ConfigMismatchError: If `expected` disagrees with the parameters
    """
    config = params.config
    if expected is not None and not expected.matches(config):
        raise ConfigMismatchError("model architecture does not match the requested configuration")
    if x.ndim != 3 or x.shape[0] != config.in_channels:
        raise ConfigMismatchError(
            f"model expects {config.in_channels} input channels ({', '.join(config.inputs)}), got shape {x.shape}"
        )
    _, h, w = x.shape
    mult = config.multiple
    padded_h = max(mult, math.ceil(h / mult) * mult)
    padded_w = max(mult, math.ceil(w / mult) * mult)
    padded = np.pad(x, ((0, 0), (0, padded_h - h), (0, padded_w - w)), mode="edge")

    out, _ = forward(params, padded[np.newaxis], training=False)
    result = out[0, :, :h, :w]
    if config.head is OutputHead.CONTOUR_DIRECTION:
        norm = np.hypot(result[1], result[2])
        confident = (result[0] > DIRECTION_THRESHOLD) & (norm > 0)
        result[1:] = np.where(confident, result[1:] / np.where(norm > 0, norm, 1.0), result[1:])
    return np.ascontiguousarray(result)
