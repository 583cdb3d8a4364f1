"""
Encoder-decoder edge fusion network.

Provides:
- ArchitectureConfig: depth, kernel size, widths, batch-norm placement, output head
- NetworkParameters: per-layer kernels, biases and batch-norm state
- forward/backward over the whole network with skip connections
- Model file save/load
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path

import numpy as np

from edgefuse.net.layers import (
    LEAKY_SLOPE,
    BatchNormCache,
    ConvCache,
    batch_norm_backward,
    batch_norm_forward,
    conv2d_backward,
    conv2d_forward,
    leaky_relu,
    leaky_relu_grad,
    same_padding,
    sigmoid,
    strided_padding,
    upsample_backward,
    upsample_forward,
)
from edgefuse.utils.errors import ConfigMismatchError, InputError, ParseError, ShapeError
from edgefuse.utils.formats import atomic_write_bytes
from edgefuse.utils.logging import get_logger

logger = get_logger(__name__)

MODEL_MAGIC = b"DCUT"
MODEL_VERSION = 1

INPUT_CHANNELS = {"color": 3, "disparity": 1, "normals": 3}
INPUT_ORDER = ("color", "disparity", "normals")
MAX_WIDTH = 256


class OutputHead(Enum):
    """What the last decoder layer predicts."""

    EDGE = "edge"
    CONTOUR_DIRECTION = "contour-direction"

    @property
    def channels(self) -> int:
        return 1 if self is OutputHead.EDGE else 3


@dataclass(frozen=True)
class ArchitectureConfig:
    """
    Network topology (`arch.*` in a run config).

    Attributes:
        n_enc: Encoder depth; the decoder mirrors it
        kernel_size: Square kernel size, even so stride 2 halves sizes exactly
        widths: Encoder output channels per layer; None uses 16, 32, 64, ... capped at 256
        batch_norm: Per-layer flags, encoder layers then decoder layers; None keeps
            batch norm away from the two layers on either side of the bottleneck
        head: Output head
        leaky_slope: Negative-side slope of the activation
        inputs: Which input channel groups the network sees, in canonical order
    """

    n_enc: int = 5
    kernel_size: int = 4
    widths: tuple[int, ...] | None = None
    batch_norm: tuple[bool, ...] | None = None
    head: OutputHead = OutputHead.EDGE
    leaky_slope: float = LEAKY_SLOPE
    inputs: tuple[str, ...] = INPUT_ORDER

    def __post_init__(self) -> None:
        if self.n_enc < 1:
            raise ValueError(f"n_enc must be >= 1, got {self.n_enc}")
        if self.kernel_size < 2 or self.kernel_size % 2:
            raise ValueError(f"kernel_size must be even and >= 2, got {self.kernel_size}")
        if self.widths is not None:
            if len(self.widths) != self.n_enc:
                raise ValueError(f"widths needs {self.n_enc} entries, got {len(self.widths)}")
            if min(self.widths) < 1:
                raise ValueError("channel widths must be >= 1")
        if self.batch_norm is not None and len(self.batch_norm) != 2 * self.n_enc:
            raise ValueError(f"batch_norm needs {2 * self.n_enc} flags, got {len(self.batch_norm)}")
        if not self.inputs:
            raise ValueError("inputs must name at least one channel group")
        unknown = [name for name in self.inputs if name not in INPUT_CHANNELS]
        if unknown:
            raise ValueError(f"unknown input channel group(s): {', '.join(unknown)}")
        if len(set(self.inputs)) != len(self.inputs):
            raise ValueError("inputs lists a channel group twice")
        # Stored in canonical order regardless of how the config listed them
        object.__setattr__(self, "inputs", tuple(name for name in INPUT_ORDER if name in self.inputs))

    @property
    def encoder_widths(self) -> tuple[int, ...]:
        if self.widths is not None:
            return self.widths
        return tuple(min(16 * 2**k, MAX_WIDTH) for k in range(self.n_enc))

    @property
    def batch_norm_flags(self) -> tuple[bool, ...]:
        if self.batch_norm is not None:
            return self.batch_norm
        n = self.n_enc
        encoder = tuple(k <= n - 2 for k in range(1, n + 1))
        decoder = tuple(3 <= m <= n - 1 for m in range(1, n + 1))
        return encoder + decoder

    @property
    def in_channels(self) -> int:
        return sum(INPUT_CHANNELS[name] for name in self.inputs)

    @property
    def multiple(self) -> int:
        """Input sizes must be a multiple of this."""
        return 2**self.n_enc

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(in channels, out channels) of every layer, encoder first."""
        n = self.n_enc
        w = self.encoder_widths
        shapes = [(self.in_channels if k == 0 else w[k - 1], w[k]) for k in range(n)]
        for m in range(1, n + 1):
            c_in = w[n - 1] if m == 1 else 2 * w[n - m]
            c_out = w[n - m - 1] if m < n else self.head.channels
            shapes.append((c_in, c_out))
        return shapes

    def layer_names(self) -> list[str]:
        return [f"enc{k}" for k in range(1, self.n_enc + 1)] + [f"dec{m}" for m in range(1, self.n_enc + 1)]

    def describe(self) -> dict[str, str]:
        """Flat key/value descriptor stored in model files."""
        return {
            "n_enc": str(self.n_enc),
            "kernel_size": str(self.kernel_size),
            "widths": ",".join(str(v) for v in self.encoder_widths),
            "batch_norm": ",".join("1" if flag else "0" for flag in self.batch_norm_flags),
            "head": self.head.value,
            "leaky_slope": repr(self.leaky_slope),
            "inputs": ",".join(self.inputs),
        }

    @classmethod
    def from_description(cls, desc: dict[str, str]) -> ArchitectureConfig:
        try:
            return cls(
                n_enc=int(desc["n_enc"]),
                kernel_size=int(desc["kernel_size"]),
                widths=tuple(int(v) for v in desc["widths"].split(",")),
                batch_norm=tuple(v == "1" for v in desc["batch_norm"].split(",")),
                head=OutputHead(desc["head"]),
                leaky_slope=float(desc["leaky_slope"]),
                inputs=tuple(desc["inputs"].split(",")),
            )
        except KeyError as e:
            raise ParseError(f"architecture descriptor lacks {e.args[0]!r}") from e
        except ValueError as e:
            raise ParseError(f"bad architecture descriptor: {e}") from e

    def matches(self, other: ArchitectureConfig) -> bool:
        return self.describe() == other.describe()


@dataclass
class LayerParameters:
    """Kernel bank, biases and optional batch-norm state of one layer."""

    name: str
    weight: np.ndarray
    bias: np.ndarray
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None

    @property
    def has_batch_norm(self) -> bool:
        return self.gamma is not None

    def trainable(self) -> list[np.ndarray]:
        tensors = [self.weight, self.bias]
        if self.gamma is not None and self.beta is not None:
            tensors += [self.gamma, self.beta]
        return tensors

    def stored(self) -> list[np.ndarray]:
        tensors = self.trainable()
        if self.running_mean is not None and self.running_var is not None:
            tensors += [self.running_mean, self.running_var]
        return tensors


@dataclass
class NetworkParameters:
    """All parameters of a network, in layer declaration order."""

    config: ArchitectureConfig
    layers: list[LayerParameters]

    @classmethod
    def init(cls, config: ArchitectureConfig, rng: np.random.Generator) -> NetworkParameters:
        """
        Draw kernels uniformly with He fan-in scaling; biases and shifts start
        at zero, scales at one, running statistics at zero mean and unit variance.
        """
        k = config.kernel_size
        layers = []
        for name, (c_in, c_out), bn in zip(
            config.layer_names(), config.layer_shapes(), config.batch_norm_flags, strict=True
        ):
            limit = np.sqrt(6.0 / (c_in * k * k))
            layer = LayerParameters(
                name=name,
                weight=rng.uniform(-limit, limit, size=(c_out, c_in, k, k)),
                bias=np.zeros(c_out),
            )
            if bn:
                layer.gamma = np.ones(c_out)
                layer.beta = np.zeros(c_out)
                layer.running_mean = np.zeros(c_out)
                layer.running_var = np.ones(c_out)
            layers.append(layer)
        return cls(config=config, layers=layers)

    def trainable(self) -> list[np.ndarray]:
        return [t for layer in self.layers for t in layer.trainable()]

    def stored(self) -> list[np.ndarray]:
        return [t for layer in self.layers for t in layer.stored()]

    def kernels_and_biases(self) -> list[np.ndarray]:
        return [t for layer in self.layers for t in (layer.weight, layer.bias)]

    def copy(self) -> NetworkParameters:
        layers = [
            LayerParameters(**{f.name: _copy_field(getattr(layer, f.name)) for f in fields(LayerParameters)})
            for layer in self.layers
        ]
        return NetworkParameters(config=self.config, layers=layers)

    def parameter_count(self) -> int:
        return sum(t.size for t in self.trainable())


def _copy_field(value: object) -> object:
    return value.copy() if isinstance(value, np.ndarray) else value


@dataclass
class _LayerRecord:
    conv: ConvCache
    bn: BatchNormCache | None
    activation_input: np.ndarray


@dataclass
class ForwardCache:
    """Activations kept by a training-mode forward pass."""

    records: list[_LayerRecord] = field(default_factory=list)
    output: np.ndarray | None = None


@dataclass
class Gradients:
    """Gradients aligned with NetworkParameters.trainable(), plus the input gradient."""

    tensors: list[np.ndarray]
    input: np.ndarray


def check_input(config: ArchitectureConfig, x: np.ndarray) -> None:
    """
    Raises:
        ShapeError: If x is not (N, in_channels, H, W) with H and W multiples of 2^n_enc
    """
    if x.ndim != 4:
        raise ShapeError(f"network input must be (batch, channels, height, width), got shape {x.shape}")
    if x.shape[1] != config.in_channels:
        raise ShapeError(f"network expects {config.in_channels} input channels, got {x.shape[1]}")
    h, w = x.shape[2:]
    mult = config.multiple
    if h < mult or w < mult or h % mult or w % mult:
        raise ShapeError(f"input size {w}x{h} must be a positive multiple of 2^{config.n_enc} = {mult}")


def _conv_bn(
    layer: LayerParameters, x: np.ndarray, stride: int, padding: tuple[int, int, int, int], training: bool
) -> tuple[np.ndarray, ConvCache, BatchNormCache | None]:
    z, conv_cache = conv2d_forward(x, layer.weight, layer.bias, stride, padding)
    if not layer.has_batch_norm:
        return z, conv_cache, None
    assert layer.gamma is not None and layer.beta is not None
    assert layer.running_mean is not None and layer.running_var is not None
    z, bn_cache = batch_norm_forward(z, layer.gamma, layer.beta, layer.running_mean, layer.running_var, training)
    return z, conv_cache, bn_cache


def _apply_head(z: np.ndarray, head: OutputHead) -> np.ndarray:
    if head is OutputHead.EDGE:
        return sigmoid(z)
    return np.concatenate([sigmoid(z[:, :1]), np.tanh(z[:, 1:])], axis=1)


def _head_backward(y: np.ndarray, dout: np.ndarray, head: OutputHead) -> np.ndarray:
    if head is OutputHead.EDGE:
        return dout * y * (1.0 - y)
    return np.concatenate([dout[:, :1] * y[:, :1] * (1.0 - y[:, :1]), dout[:, 1:] * (1.0 - y[:, 1:] ** 2)], axis=1)


def forward(
    params: NetworkParameters, x: np.ndarray, training: bool = False
) -> tuple[np.ndarray, ForwardCache | None]:
    """
    Run the network on a batch.

    Encoder layer k convolves with stride 2, optionally batch-normalizes and
    applies the leaky activation. Decoder layer m upsamples by two,
    convolves and, except for the last layer, concatenates the
    pre-activation output of the encoder layer of equal resolution before
    activating. The last layer feeds the output head.

    Args:
        params: Network parameters
        x: Input of shape (N, C, H, W)
        training: Use batch statistics, update running averages and keep a cache

    Returns:
        tuple: Head output of shape (N, head channels, H, W) and the cache
            (None unless training)

    Raises:
        ShapeError: If x does not fit the architecture
    """
    config = params.config
    check_input(config, x)
    n = config.n_enc
    slope = config.leaky_slope
    down_pad = strided_padding(config.kernel_size)
    up_pad = same_padding(config.kernel_size)

    cache = ForwardCache()
    skips: list[np.ndarray] = []
    h = np.asarray(x, dtype=np.float64)

    for k in range(n):
        z, conv_cache, bn_cache = _conv_bn(params.layers[k], h, 2, down_pad, training)
        skips.append(z)
        cache.records.append(_LayerRecord(conv_cache, bn_cache, z))
        h = leaky_relu(z, slope)

    out = h
    for m in range(1, n + 1):
        z, conv_cache, bn_cache = _conv_bn(params.layers[n + m - 1], upsample_forward(h), 1, up_pad, training)
        if m < n:
            z = np.concatenate([z, skips[n - m - 1]], axis=1)
            h = leaky_relu(z, slope)
        else:
            out = _apply_head(z, config.head)
        cache.records.append(_LayerRecord(conv_cache, bn_cache, z))

    if not training:
        return out, None
    cache.output = out
    return out, cache


def _layer_backward(
    layer: LayerParameters, record: _LayerRecord, dz: np.ndarray
) -> tuple[np.ndarray, list[np.ndarray]]:
    grads: list[np.ndarray] = []
    dgamma = dbeta = None
    if record.bn is not None:
        dz, dgamma, dbeta = batch_norm_backward(dz, record.bn)
    dx, dweight, dbias = conv2d_backward(dz, record.conv)
    grads = [dweight, dbias]
    if dgamma is not None and dbeta is not None:
        grads += [dgamma, dbeta]
    return dx, grads


def backward(params: NetworkParameters, cache: ForwardCache | None, dout: np.ndarray, l2: float = 0.0) -> Gradients:
    """
    Back-propagate a loss gradient through the network.

    Args:
        params: Parameters the forward pass used
        cache: Cache from a training-mode forward pass
        dout: Gradient of the loss with respect to the head output
        l2: Weight of the L2 penalty on kernels and biases; adds 2 * l2 * p

    Returns:
        Gradients: One array per trainable tensor and the input gradient

    Raises:
        ValueError: If the cache is missing
    """
    if cache is None or cache.output is None:
        raise ValueError("backward needs the cache of a training-mode forward pass")
    config = params.config
    n = config.n_enc
    slope = config.leaky_slope
    per_layer: list[list[np.ndarray]] = [[] for _ in range(2 * n)]
    skip_grads: list[np.ndarray | None] = [None] * n

    dz = _head_backward(cache.output, dout, config.head)
    for m in range(n, 0, -1):
        index = n + m - 1
        record = cache.records[index]
        if m < n:
            dcat = dz * leaky_relu_grad(record.activation_input, slope)
            c_out = params.layers[index].weight.shape[0]
            dz, skip_grads[n - m - 1] = dcat[:, :c_out], dcat[:, c_out:]
        dup, per_layer[index] = _layer_backward(params.layers[index], record, dz)
        dz = upsample_backward(dup)

    # dz now holds the gradient with respect to the bottleneck activation
    dh = dz
    for k in range(n - 1, -1, -1):
        record = cache.records[k]
        dz = dh * leaky_relu_grad(record.activation_input, slope)
        skip = skip_grads[k]
        if skip is not None:
            dz = dz + skip
        dh, per_layer[k] = _layer_backward(params.layers[k], record, dz)

    if l2 > 0:
        for layer, layer_grads in zip(params.layers, per_layer, strict=True):
            layer_grads[0] += 2.0 * l2 * layer.weight
            layer_grads[1] += 2.0 * l2 * layer.bias
    tensors = [g for layer_grads in per_layer for g in layer_grads]
    return Gradients(tensors=tensors, input=dh)


def l2_penalty(params: NetworkParameters, l2: float) -> float:
    """l2 times the squared norm of all kernels and biases."""
    if l2 <= 0:
        return 0.0
    return l2 * float(sum(np.sum(t * t) for t in params.kernels_and_biases()))


def first_nonfinite_layer(params: NetworkParameters, cache: ForwardCache) -> str | None:
    """Name of the first layer whose pre-activation holds a NaN or Inf."""
    for layer, record in zip(params.layers, cache.records, strict=False):
        if not np.isfinite(record.activation_input).all():
            return layer.name
    return None


# --- Model files ---


def encode_model(params: NetworkParameters) -> bytes:
    """Serialize parameters: magic, version, descriptor, then little-endian f32 tensors."""
    descriptor = "".join(f"{k}={v}\n" for k, v in params.config.describe().items()).encode("utf-8")
    header = MODEL_MAGIC + struct.pack("<II", MODEL_VERSION, len(descriptor)) + descriptor
    body = b"".join(np.ascontiguousarray(t, dtype="<f4").tobytes() for t in params.stored())
    return header + body


def save_model(path: str | Path, params: NetworkParameters) -> Path:
    """Atomically write a model file."""
    written = atomic_write_bytes(path, encode_model(params))
    logger.info("Saved model (%d parameters) to %s", params.parameter_count(), written)
    return written


def load_model(path: str | Path, expected: ArchitectureConfig | None = None) -> NetworkParameters:
    """
    Read a model file.

    Args:
        path: Model file
        expected: Architecture the caller requires, if any

    Returns:
        NetworkParameters: Parameters as float64

    Raises:
        ParseError: On a bad magic, version or descriptor
        ConfigMismatchError: If the file disagrees with `expected` or its tensor payload has the wrong size
    """
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise InputError(f"{path}: cannot read model: {e}") from e

    if buf[:4] != MODEL_MAGIC:
        raise ParseError("not a model file (bad magic)", path)
    if len(buf) < 12:
        raise ParseError("truncated model header", path)
    version, desc_len = struct.unpack("<II", buf[4:12])
    if version != MODEL_VERSION:
        raise ParseError(f"unsupported model version {version}", path)

    desc: dict[str, str] = {}
    for line in buf[12 : 12 + desc_len].decode("utf-8", errors="replace").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"bad descriptor line {line!r}", path)
        desc[key] = value
    try:
        config = ArchitectureConfig.from_description(desc)
    except ParseError as e:
        raise ParseError(str(e), path) from e

    if expected is not None and not expected.matches(config):
        diffs = [
            f"{key}: file {value}, expected {expected.describe()[key]}"
            for key, value in config.describe().items()
            if expected.describe()[key] != value
        ]
        raise ConfigMismatchError(f"{path}: architecture mismatch ({'; '.join(diffs)})")

    params = NetworkParameters.init(config, np.random.default_rng(0))
    tensors = params.stored()
    needed = sum(t.size for t in tensors) * 4
    payload = buf[12 + desc_len :]
    if len(payload) != needed:
        raise ConfigMismatchError(f"{path}: tensor payload has {len(payload)} bytes, architecture needs {needed}")

    offset = 0
    for t in tensors:
        count = t.size
        t[...] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(t.shape)
        offset += count * 4
    logger.debug("Loaded model %s (%s)", path, config.describe())
    return params
