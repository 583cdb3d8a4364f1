"""
Tests for the masked loss and texture-edge mask.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.net.loss import color_edges, make_mask, masked_loss, masked_loss_grad  # noqa: E402
from edgefuse.utils.errors import ShapeError  # noqa: E402


def _striped_color() -> np.ndarray:
    """Gray image with equal luminance steps between columns 3/4 and 11/12."""
    color = np.zeros((16, 20, 3))
    color[:, 4:12] = 64.0
    color[:, 12:] = 128.0
    return color


class TestMaskedLoss:
    """Tests for the masked squared error."""

    def test_weighted_value(self) -> None:
        """Test that the mask scales the error before squaring."""
        pred = np.full((2, 2), 0.5)
        target = np.zeros((2, 2))
        assert masked_loss(pred, target, np.full((2, 2), 10.0)) == pytest.approx(25.0)
        assert masked_loss(pred, target, np.ones((2, 2))) == pytest.approx(0.25)

    def test_gradient(self) -> None:
        """Test the analytic gradient against finite differences."""
        rng = np.random.default_rng(0)
        pred = rng.uniform(size=(2, 3))
        target = rng.uniform(size=(2, 3))
        mask = np.where(rng.uniform(size=(2, 3)) > 0.5, 10.0, 1.0)
        grad = masked_loss_grad(pred, target, mask)
        h = 1e-6
        for idx in np.ndindex(pred.shape):
            step = np.zeros_like(pred)
            step[idx] = h
            numeric = (masked_loss(pred + step, target, mask) - masked_loss(pred - step, target, mask)) / (2 * h)
            assert grad[idx] == pytest.approx(numeric, rel=1e-5)

    def test_misaligned(self) -> None:
        """Test that shapes must agree."""
        with pytest.raises(ShapeError):
            masked_loss(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 3)))
        with pytest.raises(ShapeError):
            masked_loss_grad(np.zeros((2, 2)), np.zeros((3, 2)), np.ones((2, 2)))


class TestMask:
    """Tests for texture-edge weighting."""

    def test_texture_edges_weighted(self) -> None:
        """Test that only color edges away from depth edges get the weight."""
        edge_prob = np.zeros((16, 20))
        edge_prob[:, 11:13] = 1.0
        mask = make_mask(_striped_color(), edge_prob)
        assert np.all(mask[:, 3:5] == 10.0)
        assert np.all(mask[:, 9:15] == 1.0)
        assert set(np.unique(mask)) == {1.0, 10.0}

    def test_uniform_color(self) -> None:
        """Test that a flat image has no color edges."""
        assert not color_edges(np.full((6, 6, 3), 50.0)).any()
        assert np.all(make_mask(np.full((6, 6, 3), 50.0), np.zeros((6, 6))) == 1.0)

    def test_custom_weight(self) -> None:
        """Test the weight parameter."""
        mask = make_mask(_striped_color(), np.zeros((16, 20)), weight=4.0)
        assert mask.max() == 4.0

    def test_misaligned(self) -> None:
        """Test that color and edges must agree in size."""
        with pytest.raises(ShapeError):
            make_mask(np.zeros((4, 4, 3)), np.zeros((4, 5)))
        with pytest.raises(ShapeError):
            color_edges(np.zeros((4, 4)))
