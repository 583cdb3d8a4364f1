"""
Layer primitives with explicit forward and backward passes.

Tensors are NCHW float64. Every forward function returns its output plus
a cache object; the matching backward function takes the upstream
gradient and that cache.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

LEAKY_SLOPE = 0.2
BN_EPS = 1e-5
BN_MOMENTUM = 0.1

# (top, bottom, left, right)
Padding = tuple[int, int, int, int]


def same_padding(kernel_size: int) -> Padding:
    """Padding that keeps the spatial size for stride 1; even kernels pad one more after."""
    before = (kernel_size - 1) // 2
    after = kernel_size - 1 - before
    return (before, after, before, after)


def strided_padding(kernel_size: int) -> Padding:
    """Padding that halves an even spatial size exactly with stride 2."""
    p = (kernel_size - 2) // 2
    return (p, p, p, p)


# --- Activations ---


def leaky_relu(x: np.ndarray | float, slope: float = LEAKY_SLOPE) -> np.ndarray:
    """x for x >= 0, slope * x otherwise."""
    arr = np.asarray(x, dtype=np.float64)
    return np.where(arr >= 0, arr, slope * arr)


def leaky_relu_grad(x: np.ndarray | float, slope: float = LEAKY_SLOPE) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    return np.where(arr >= 0, 1.0, slope)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


# --- Convolution ---


@dataclass
class ConvCache:
    input_shape: tuple[int, ...]
    padded_shape: tuple[int, ...]
    windows: np.ndarray
    weight: np.ndarray
    stride: int
    padding: Padding


def conv2d_forward(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int, padding: Padding
) -> tuple[np.ndarray, ConvCache]:
    """
    Cross-correlate a batch with a filter bank.

    Args:
        x: Input of shape (N, C, H, W)
        weight: Kernels of shape (O, C, kh, kw)
        bias: One bias per output channel
        stride: Step between output samples
        padding: Zero padding (top, bottom, left, right)

    Returns:
        tuple: Output of shape (N, O, H_out, W_out) and the cache for backward
    """
    top, bottom, left, right = padding
    kh, kw = weight.shape[2:]
    padded = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias[np.newaxis, :, np.newaxis, np.newaxis]
    return np.ascontiguousarray(out), ConvCache(x.shape, padded.shape, windows, weight, stride, padding)


def conv2d_backward(dout: np.ndarray, cache: ConvCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of a convolution.

    Returns:
        tuple: (d input, d weight, d bias)
    """
    stride = cache.stride
    kh, kw = cache.weight.shape[2:]
    _, _, h_out, w_out = dout.shape

    dweight = np.tensordot(dout, cache.windows, axes=([0, 2, 3], [0, 2, 3]))
    dbias = dout.sum(axis=(0, 2, 3))

    # (N, H_out, W_out, C, kh, kw): contribution of every output sample to its window
    dcols = np.tensordot(dout, cache.weight, axes=([1], [0]))
    dpadded = np.zeros(cache.padded_shape)
    for i in range(kh):
        for j in range(kw):
            dpadded[:, :, i : i + stride * h_out : stride, j : j + stride * w_out : stride] += dcols[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)

    top, _, left, _ = cache.padding
    h, w = cache.input_shape[2:]
    return dpadded[:, :, top : top + h, left : left + w], dweight, dbias


# --- Resampling ---


def upsample_forward(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbor upsampling by two."""
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample_backward(dout: np.ndarray) -> np.ndarray:
    n, c, h, w = dout.shape
    return dout.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


# --- Batch normalization ---


@dataclass
class BatchNormCache:
    normalized: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    training: bool


def batch_norm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
) -> tuple[np.ndarray, BatchNormCache]:
    """
    Normalize each channel to zero mean and unit variance, then scale and shift.

    Training mode uses batch statistics and updates the running averages in
    place; inference mode uses the running averages and is affine.
    """
    if training:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        count = x.shape[0] * x.shape[2] * x.shape[3]
        unbiased = var * count / (count - 1) if count > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mean, var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    normalized = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma[None, :, None, None] * normalized + beta[None, :, None, None]
    return out, BatchNormCache(normalized, inv_std, gamma, training)


def batch_norm_backward(dout: np.ndarray, cache: BatchNormCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of batch normalization.

    Returns:
        tuple: (d input, d gamma, d beta)
    """
    xhat = cache.normalized
    dgamma = np.sum(dout * xhat, axis=(0, 2, 3))
    dbeta = dout.sum(axis=(0, 2, 3))
    dxhat = dout * cache.gamma[None, :, None, None]
    inv_std = cache.inv_std[None, :, None, None]
    if not cache.training:
        return dxhat * inv_std, dgamma, dbeta

    m = dout.shape[0] * dout.shape[2] * dout.shape[3]
    sum_dxhat = dxhat.sum(axis=(0, 2, 3), keepdims=True)
    sum_dxhat_xhat = np.sum(dxhat * xhat, axis=(0, 2, 3), keepdims=True)
    dx = inv_std / m * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta
