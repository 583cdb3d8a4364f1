"""
Tests for network layer primitives.

Backward passes are checked against central finite differences in float64.
"""

from __future__ import annotations

import sys
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.net.layers import (  # noqa: E402
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

H = 1e-3


def _numeric_grad(f: Callable[[], float], arr: np.ndarray) -> np.ndarray:
    """Central differences of f with respect to every entry of arr (modified in place)."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = arr[idx]
        arr[idx] = saved + H
        plus = f()
        arr[idx] = saved - H
        minus = f()
        arr[idx] = saved
        grad[idx] = (plus - minus) / (2 * H)
    return grad


def _naive_conv(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, padding: tuple) -> np.ndarray:
    top, bottom, left, right = padding
    xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    n, _, hp, wp = xp.shape
    o, _, kh, kw = w.shape
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1
    out = np.zeros((n, o, h_out, w_out))
    for i in range(h_out):
        for j in range(w_out):
            patch = xp[:, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
            out[:, :, i, j] = np.tensordot(patch, w, axes=([1, 2, 3], [1, 2, 3])) + b
    return out


class TestPadding:
    """Tests for padding helpers."""

    def test_same_padding_even_kernel(self) -> None:
        """Test the extra row and column after for even kernels."""
        assert same_padding(4) == (1, 2, 1, 2)
        assert same_padding(3) == (1, 1, 1, 1)

    def test_strided_halves(self) -> None:
        """Test that stride 2 with strided padding halves even sizes."""
        rng = np.random.default_rng(0)
        x = rng.standard_normal((1, 2, 8, 6))
        w = rng.standard_normal((3, 2, 4, 4))
        out, _ = conv2d_forward(x, w, np.zeros(3), 2, strided_padding(4))
        assert out.shape == (1, 3, 4, 3)


class TestConvolution:
    """Tests for conv2d."""

    @pytest.mark.parametrize("stride,kernel", [(1, 4), (2, 4), (1, 3)])
    def test_forward_matches_loops(self, stride: int, kernel: int) -> None:
        """Test the vectorized forward pass against explicit loops."""
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 3, 6, 6))
        w = rng.standard_normal((4, 3, kernel, kernel))
        b = rng.standard_normal(4)
        padding = same_padding(kernel) if stride == 1 else strided_padding(kernel)
        out, _ = conv2d_forward(x, w, b, stride, padding)
        np.testing.assert_allclose(out, _naive_conv(x, w, b, stride, padding), rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_backward_finite_differences(self, stride: int) -> None:
        """Test input, weight and bias gradients."""
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 2, 4, 4))
        w = rng.standard_normal((3, 2, 4, 4))
        b = rng.standard_normal(3)
        padding = same_padding(4) if stride == 1 else strided_padding(4)
        out, cache = conv2d_forward(x, w, b, stride, padding)
        upstream = rng.standard_normal(out.shape)

        def loss() -> float:
            return float(np.sum(conv2d_forward(x, w, b, stride, padding)[0] * upstream))

        dx, dw, db = conv2d_backward(upstream, cache)
        np.testing.assert_allclose(dx, _numeric_grad(loss, x), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(dw, _numeric_grad(loss, w), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(db, _numeric_grad(loss, b), rtol=1e-6, atol=1e-8)


class TestBatchNorm:
    """Tests for batch normalization."""

    def test_training_normalizes(self) -> None:
        """Test zero mean and unit variance per channel with identity affine."""
        rng = np.random.default_rng(3)
        x = 3.0 + 2.0 * rng.standard_normal((4, 2, 5, 5))
        out, _ = batch_norm_forward(x, np.ones(2), np.zeros(2), np.zeros(2), np.ones(2), training=True)
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1.0, atol=1e-4)

    def test_running_statistics(self) -> None:
        """Test the exponential moving average update."""
        x = np.full((2, 1, 2, 2), 5.0)
        running_mean = np.zeros(1)
        running_var = np.ones(1)
        batch_norm_forward(x, np.ones(1), np.zeros(1), running_mean, running_var, training=True, momentum=0.5)
        assert running_mean[0] == pytest.approx(2.5)
        assert running_var[0] == pytest.approx(0.5)

    def test_inference_is_affine(self) -> None:
        """Test that inference uses the running averages."""
        x = np.arange(8.0).reshape(1, 2, 2, 2)
        gamma, beta = np.array([2.0, 1.0]), np.array([0.5, -1.0])
        mean, var = np.array([1.0, 2.0]), np.array([4.0, 9.0])
        out, _ = batch_norm_forward(x, gamma, beta, mean.copy(), var.copy(), training=False, eps=0.0)
        expected = gamma[None, :, None, None] * (x - mean[None, :, None, None]) / np.sqrt(var)[None, :, None, None]
        np.testing.assert_allclose(out, expected + beta[None, :, None, None])

    @pytest.mark.parametrize("training", [True, False])
    def test_backward_finite_differences(self, training: bool) -> None:
        """Test input, gamma and beta gradients."""
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 3, 3, 3))
        gamma = rng.uniform(0.5, 1.5, 3)
        beta = rng.standard_normal(3)
        running_mean = rng.standard_normal(3)
        running_var = rng.uniform(0.5, 2.0, 3)
        upstream = rng.standard_normal(x.shape)

        def forward() -> tuple[np.ndarray, object]:
            return batch_norm_forward(x, gamma, beta, running_mean.copy(), running_var.copy(), training)

        def loss() -> float:
            return float(np.sum(forward()[0] * upstream))

        _, cache = forward()
        dx, dgamma, dbeta = batch_norm_backward(upstream, cache)
        np.testing.assert_allclose(dx, _numeric_grad(loss, x), rtol=1e-4, atol=1e-6)
        np.testing.assert_allclose(dgamma, _numeric_grad(loss, gamma), rtol=1e-4, atol=1e-6)
        np.testing.assert_allclose(dbeta, _numeric_grad(loss, beta), rtol=1e-4, atol=1e-6)


class TestActivationsAndResampling:
    """Tests for activations and nearest upsampling."""

    def test_leaky_relu(self) -> None:
        """Test both branches and the derivative."""
        x = np.array([-2.0, 0.0, 3.0])
        np.testing.assert_allclose(leaky_relu(x), [-0.4, 0.0, 3.0])
        np.testing.assert_allclose(leaky_relu_grad(x), [0.2, 1.0, 1.0])

    def test_sigmoid(self) -> None:
        """Test the midpoint and saturation without overflow."""
        assert sigmoid(np.array(0.0)) == 0.5
        assert sigmoid(np.array(-1000.0)) == 0.0
        assert sigmoid(np.array(1000.0)) == 1.0

    def test_upsample_adjoint(self) -> None:
        """Test that the backward pass is the adjoint of nearest upsampling."""
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 2, 3, 4))
        y = rng.standard_normal((1, 2, 6, 8))
        up = upsample_forward(x)
        assert up.shape == (1, 2, 6, 8)
        assert np.sum(up * y) == pytest.approx(np.sum(x * upsample_backward(y)))
