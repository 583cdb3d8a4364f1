"""
Tests for training and inference.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from edgefuse.dataset import DatasetManifest, SceneBundle, make_dataset  # noqa: E402
from edgefuse.net.model import ArchitectureConfig, NetworkParameters, OutputHead  # noqa: E402
from edgefuse.net.training import (  # noqa: E402
    EpochLoss,
    Optimizer,
    OptimizerState,
    SceneTensors,
    TrainConfig,
    TrainingExample,
    adam_step,
    assemble_input,
    center_patch,
    format_loss_log,
    infer,
    nesterov_step,
    patch_offsets,
    prepare_scene,
    sample_patch,
    train,
    training_step,
    write_loss_log,
)
from edgefuse.scenes import SceneConfig  # noqa: E402
from edgefuse.utils.errors import ConfigMismatchError, NumericError, ShapeError  # noqa: E402

TINY = ArchitectureConfig(n_enc=2, kernel_size=2, widths=(2, 3))
TINY_DISPARITY = ArchitectureConfig(n_enc=2, kernel_size=2, widths=(2, 3), inputs=("disparity",))
QUICK = TrainConfig(patch_size=8, batch_size=2, epochs=2, seed=1)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory: pytest.TempPathFactory) -> DatasetManifest:
    """Two 16x16 scenes."""
    return make_dataset(tmp_path_factory.mktemp("train"), 2, SceneConfig(width=16, height=16), seed=5)


def _grid_scene(channels: int = 1, size: int = 10) -> SceneTensors:
    grid = np.arange(size * size, dtype=np.float64).reshape(1, size, size)
    x = np.repeat(grid, channels, axis=0)
    return SceneTensors(name="grid", x=x, target=grid.copy(), mask=grid.copy())


class TestTrainConfig:
    """Tests for training knobs."""

    def test_defaults(self) -> None:
        """Test the documented defaults."""
        config = TrainConfig()
        assert (config.patch_size, config.batch_size, config.epochs) == (256, 5, 30)
        assert config.mask_weight == 10.0

    def test_validation(self) -> None:
        """Test rejected values."""
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(beta1=1.0)
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=1.0)


class TestInputs:
    """Tests for input assembly and targets."""

    def test_normalization(self) -> None:
        """Test color scaling, disparity mean division and channel order."""
        color = np.full((2, 2, 3), 255.0)
        disparity = np.array([[2.0, 4.0], [6.0, 8.0]])
        normals = np.zeros((2, 2, 3))
        normals[:, :, 2] = 1.0
        x = assemble_input(("color", "disparity", "normals"), color, disparity, normals)
        assert x.shape == (7, 2, 2)
        assert np.all(x[:3] == 1.0)
        np.testing.assert_allclose(x[3], disparity / 5.0)
        assert np.all(x[6] == 1.0)

    def test_missing_group(self) -> None:
        """Test that a selected group must be given."""
        with pytest.raises(ShapeError):
            assemble_input(("color", "disparity"), disparity=np.ones((2, 2)))

    def test_size_mismatch(self) -> None:
        """Test that groups must share a size."""
        with pytest.raises(ShapeError):
            assemble_input(("color", "disparity"), np.zeros((2, 2, 3)), np.ones((2, 3)))

    def test_edge_targets(self, dataset: DatasetManifest) -> None:
        """Test edge-head tensors from a scene folder."""
        bundle = SceneBundle.load(dataset.folder(dataset.entries[0]))
        scene = prepare_scene(bundle, TINY, mask_weight=4.0)
        assert scene.x.shape == (7, 16, 16)
        assert scene.target.shape == (1, 16, 16)
        assert set(np.unique(scene.mask)) <= {1.0, 4.0}

    def test_direction_targets(self, dataset: DatasetManifest) -> None:
        """Test that direction errors only count on contours."""
        bundle = SceneBundle.load(dataset.folder(dataset.entries[0]))
        arch = ArchitectureConfig(n_enc=2, kernel_size=2, widths=(2, 3), head=OutputHead.CONTOUR_DIRECTION)
        scene = prepare_scene(bundle, arch)
        assert scene.target.shape == (3, 16, 16)
        np.testing.assert_array_equal(scene.mask[1], scene.target[0])
        on = scene.target[0] > 0
        np.testing.assert_allclose(np.hypot(scene.target[1], scene.target[2])[on], 1.0)


class TestPatches:
    """Tests for patch sampling."""

    def test_aligned(self) -> None:
        """Test that input, target and mask are cropped at the same offset."""
        rng = np.random.default_rng(0)
        for _ in range(5):
            example = sample_patch(_grid_scene(), 4, rng)
            assert example.x.shape == (1, 4, 4)
            np.testing.assert_array_equal(example.x, example.target)
            np.testing.assert_array_equal(example.mask, example.target)

    def test_exposure_jitter(self) -> None:
        """Test that only color channels are scaled, by one common gain."""
        example = sample_patch(_grid_scene(channels=2), 4, np.random.default_rng(1), 0.1, color_channels=1)
        np.testing.assert_array_equal(example.x[1], example.target[0])
        nonzero = example.target[0] > 0
        gains = example.x[0][nonzero] / example.target[0][nonzero]
        assert np.allclose(gains, gains[0])
        assert 0.9 <= gains[0] <= 1.1

    def test_offsets_uniform(self) -> None:
        """Test 10^4 patch offsets on a 512x512 scene against a uniform chi-square."""
        rng = np.random.default_rng(0)
        draws = np.array([patch_offsets(512, 512, 256, rng) for _ in range(10_000)])
        assert draws.min() >= 0
        assert draws.max() <= 256
        for axis in range(2):
            counts = np.bincount(draws[:, axis], minlength=257)
            assert counts.size == 257
            assert stats.chisquare(counts).pvalue > 0.01

    def test_sample_patch_uses_offsets(self) -> None:
        """Test that a sampled patch starts at the offset drawn from the same generator."""
        scene = _grid_scene(size=20)
        for seed in range(5):
            top, left = patch_offsets(20, 20, 6, np.random.default_rng(seed))
            example = sample_patch(scene, 6, np.random.default_rng(seed))
            assert example.x[0, 0, 0] == top * 20 + left

    def test_scene_too_small(self) -> None:
        """Test that a patch larger than the scene is refused."""
        with pytest.raises(ShapeError):
            sample_patch(_grid_scene(size=6), 8, np.random.default_rng(0))

    def test_center_patch(self) -> None:
        """Test the fixed validation crop."""
        example = center_patch(_grid_scene(), 4)
        assert example.x[0, 0, 0] == 33.0


class TestOptimizers:
    """Tests for update rules."""

    def test_adam_first_step(self) -> None:
        """Test that the bias-corrected first step has size learning_rate."""
        config = TrainConfig(learning_rate=0.01)
        tensors = [np.zeros(2)]
        state = OptimizerState.zeros(tensors)
        adam_step(tensors, [np.array([2.0, -0.5])], state, config)
        assert state.step == 1
        np.testing.assert_allclose(tensors[0], [-0.01, 0.01], rtol=1e-6)

    def test_nesterov_first_step(self) -> None:
        """Test the first step from zero velocity."""
        config = TrainConfig(learning_rate=0.1, momentum=0.5, optimizer=Optimizer.NESTEROV)
        tensors = [np.array([1.0])]
        state = OptimizerState.zeros(tensors)
        nesterov_step(tensors, [np.array([2.0])], state, config)
        assert tensors[0][0] == pytest.approx(1.0 - 1.5 * 0.1 * 2.0)


class TestTrainingStep:
    """Tests for single updates."""

    def _batch(self) -> TrainingExample:
        x = np.random.default_rng(2).standard_normal((2, 1, 8, 8))
        return TrainingExample(x=x, target=np.full((2, 1, 8, 8), 0.2), mask=np.ones((2, 1, 8, 8)))

    def test_loss_decreases(self) -> None:
        """Test that repeated updates on one batch fit it better."""
        config = TrainConfig(learning_rate=0.01, l2_weight=0.0)
        params = NetworkParameters.init(TINY_DISPARITY, np.random.default_rng(3))
        state = OptimizerState.zeros(params.trainable())
        batch = self._batch()
        losses = [training_step(params, batch, state, config) for _ in range(40)]
        assert losses[-1] < losses[0]

    def test_non_finite_loss(self) -> None:
        """Test that a NaN loss names the first broken layer."""
        params = NetworkParameters.init(TINY_DISPARITY, np.random.default_rng(3))
        params.layers[0].weight[0, 0, 0, 0] = np.nan
        with pytest.raises(NumericError) as exc_info:
            training_step(params, self._batch(), OptimizerState.zeros(params.trainable()), TrainConfig())
        assert "enc1" in str(exc_info.value)


class TestTrain:
    """Tests for the epoch loop."""

    def test_log(self, dataset: DatasetManifest) -> None:
        """Test one baseline row plus one row per epoch."""
        result = train(dataset, TINY, QUICK)
        assert [record.epoch for record in result.log] == [0, 1, 2]
        assert all(np.isfinite(record.train_loss) and np.isfinite(record.val_loss) for record in result.log)

    def test_deterministic(self, dataset: DatasetManifest) -> None:
        """Test that the seed fixes the trained parameters."""
        first = train(dataset, TINY, QUICK)
        second = train(dataset, TINY, QUICK)
        for a, b in zip(first.params.trainable(), second.params.trainable(), strict=True):
            np.testing.assert_array_equal(a, b)

    def test_patch_size_checks(self, dataset: DatasetManifest) -> None:
        """Test patches that do not fit the network or the scenes."""
        with pytest.raises(ShapeError):
            train(dataset, TINY, TrainConfig(patch_size=6, epochs=1))
        with pytest.raises(ShapeError):
            train(dataset, TINY, TrainConfig(patch_size=32, epochs=1))

    def test_loss_log(self, tmp_path: Path) -> None:
        """Test the CSV layout."""
        log = [EpochLoss(0, 0.5, 0.25), EpochLoss(1, 0.125, 0.0625)]
        text = format_loss_log(log)
        assert text.splitlines() == ["epoch,train_loss,val_loss", "0,0.5,0.25", "1,0.125,0.0625"]
        assert write_loss_log(tmp_path / "loss.csv", log).read_text() == text


class TestInfer:
    """Tests for whole-image inference."""

    def test_any_size(self) -> None:
        """Test that padding lets odd sizes through and output is cropped back."""
        params = NetworkParameters.init(TINY_DISPARITY, np.random.default_rng(0))
        out = infer(params, np.ones((1, 5, 7)))
        assert out.shape == (1, 5, 7)

    def test_architecture_checks(self) -> None:
        """Test expected-architecture and channel-count mismatches."""
        params = NetworkParameters.init(TINY_DISPARITY, np.random.default_rng(0))
        with pytest.raises(ConfigMismatchError):
            infer(params, np.ones((1, 4, 4)), expected=TINY)
        with pytest.raises(ConfigMismatchError):
            infer(params, np.ones((7, 4, 4)))

    def test_unit_directions(self) -> None:
        """Test that confident contour pixels get unit directions."""
        arch = ArchitectureConfig(
            n_enc=2, kernel_size=2, widths=(2, 3), inputs=("disparity",), head=OutputHead.CONTOUR_DIRECTION
        )
        params = NetworkParameters.init(arch, np.random.default_rng(4))
        params.layers[-1].bias[0] = 50.0
        x = np.random.default_rng(5).uniform(1.0, 2.0, size=(1, 8, 8))
        out = infer(params, x)
        assert np.all(out[0] > 0.5)
        np.testing.assert_allclose(np.hypot(out[1], out[2]), 1.0)
