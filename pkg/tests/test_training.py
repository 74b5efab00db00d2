"""
Tests for the training module.
"""

import numpy as np
import pytest
import torch

from diffpaint.denoiser import build_tiny_denoiser
from diffpaint.exceptions import TrainingError
from diffpaint.field import make_rng
from diffpaint.masks import generate_mask
from diffpaint.metrics import corpus_mean, evaluate
from diffpaint.sampler import mean_fill, single_stage_inpaint
from diffpaint.schedule import make_linear_schedule, p2_weights
from diffpaint.training import make_toy_dataset, make_toy_image, p2_loss, train_p2
from diffpaint.types import MaskKind, P2Params, StageParams


@pytest.fixture
def toy_data():
    """Eight 8x8 toy images."""
    return make_toy_dataset(8, size=8, seed=1)


def _loss_inputs(sched, p=None, seed=0):
    gen = torch.Generator().manual_seed(seed)
    x0 = torch.rand((2, 1, 8, 8), generator=gen, dtype=torch.float64)
    eps = torch.randn((2, 1, 8, 8), generator=gen, dtype=torch.float64)
    t = torch.tensor([3, 17])
    alpha_bar = torch.from_numpy(sched.alpha_bar.copy())
    weights = torch.from_numpy(p2_weights(sched, p))
    return x0, t, eps, alpha_bar, weights


class TestToyData:
    """Test cases for the procedural toy dataset."""

    def test_image_shape_and_range(self):
        """Test one image's shape and value range."""
        img = make_toy_image(make_rng(0), size=16)

        assert img.shape == (16, 16, 1)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_dataset_reproducible(self):
        """Test that a seed reproduces the dataset."""
        a = make_toy_dataset(3, size=8, seed=4)
        b = make_toy_dataset(3, size=8, seed=4)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_images_differ(self):
        """Test that consecutive images are distinct."""
        a, b = make_toy_dataset(2, size=16, seed=0)
        assert not np.array_equal(a, b)


class TestP2Loss:
    """Test cases for p2_loss."""

    def test_zero_model_loss(self, schedule_100):
        """Test the loss of a zero-predicting model by hand."""
        model = build_tiny_denoiser(width=16).double()
        p = P2Params(gamma=0.0)
        x0, t, eps, alpha_bar, weights = _loss_inputs(schedule_100, p)

        loss = p2_loss(model, x0, t, eps, alpha_bar, weights)

        mse = (eps**2).flatten(1).mean(dim=1)
        expected = (weights[t] * mse).mean()
        assert loss.item() == pytest.approx(expected.item())

    def test_gradient_matches_finite_differences(self, schedule_100):
        """Test autograd against central differences on 10 random entries."""
        model = build_tiny_denoiser(width=16, seed=3).double()
        with torch.no_grad():
            model.conv_out.weight.normal_(std=0.1)
        inputs = _loss_inputs(schedule_100)

        loss = p2_loss(model, *inputs)
        loss.backward()

        params = list(model.parameters())
        gen = make_rng(5)
        h = 1e-6
        for _ in range(10):
            param = params[int(gen.integers(len(params)))]
            i = int(gen.integers(param.numel()))
            flat = param.data.view(-1)
            analytic = param.grad.view(-1)[i].item()
            flat[i] += h
            plus = p2_loss(model, *inputs).item()
            flat[i] -= 2 * h
            minus = p2_loss(model, *inputs).item()
            flat[i] += h
            numeric = (plus - minus) / (2 * h)
            assert analytic == pytest.approx(numeric, rel=1e-3, abs=1e-7)


class TestTrainP2:
    """Test cases for train_p2."""

    def test_empty_data(self, schedule_100):
        """Test that empty data raises TrainingError."""
        with pytest.raises(TrainingError):
            train_p2(build_tiny_denoiser(width=16), [], schedule_100, steps=1)

    def test_steps_must_be_positive(self, schedule_100, toy_data):
        """Test that steps < 1 raises TrainingError."""
        with pytest.raises(TrainingError):
            train_p2(build_tiny_denoiser(width=16), toy_data, schedule_100, steps=0)

    def test_mixed_shapes(self, schedule_100, toy_data):
        """Test that images of different shapes are rejected."""
        data = toy_data + [np.zeros((4, 4, 1))]
        with pytest.raises(TrainingError):
            train_p2(build_tiny_denoiser(width=16), data, schedule_100, steps=1)

    def test_non_finite_loss(self, schedule_100):
        """Test that a NaN loss aborts with step and diagnostics."""
        data = [np.full((8, 8, 1), np.nan)] * 2
        with pytest.raises(TrainingError) as exc_info:
            train_p2(
                build_tiny_denoiser(width=16), data, schedule_100, steps=3, batch=2
            )

        error = exc_info.value
        assert error.step == 1
        assert np.isnan(error.diagnostics["loss"])
        assert len(error.diagnostics["t"]) == 2
        assert "Non-finite loss at step 1" in str(error)

    def test_checkpoints(self, schedule_100, toy_data):
        """Test the checkpoint cadence and contents of a short run."""
        report = train_p2(
            build_tiny_denoiser(width=16),
            toy_data,
            schedule_100,
            steps=5,
            batch=2,
            rng=make_rng(0),
            checkpoint_every=2,
        )

        assert [c.step for c in report.checkpoints] == [2, 4, 5]
        assert all(np.isfinite(c.loss) and c.loss > 0 for c in report.checkpoints)
        assert report.to_dict()["checkpoints"][0]["step"] == 2

    def test_updates_parameters(self, schedule_100, toy_data):
        """Test that training moves the zero-initialized head."""
        model = build_tiny_denoiser(width=16)
        train_p2(model, toy_data, schedule_100, steps=2, batch=2, lr=1e-3)
        assert model.conv_out.weight.abs().sum().item() > 0

    def test_reproducible(self, schedule_100, toy_data):
        """Test that identical seeds give identical loss traces."""

        def run():
            model = build_tiny_denoiser(width=16, seed=0)
            report = train_p2(
                model, toy_data, schedule_100, steps=3, batch=2, rng=make_rng(9)
            )
            return [c.loss for c in report.checkpoints]

        assert run() == run()

    @pytest.mark.slow
    def test_loss_halves(self):
        """Test that 3000 steps on the 512-image toy set at least halve the loss."""
        sched = make_linear_schedule(1000)
        data = make_toy_dataset(512, size=32, seed=0)
        report = train_p2(
            build_tiny_denoiser(),
            data,
            sched,
            steps=3000,
            batch=16,
            rng=make_rng(0),
            checkpoint_every=100,
        )
        assert report.final_loss <= 0.5 * report.initial_loss


class TestTrainedInpainting:
    """Test cases for inpainting with a trained TinyDenoiser."""

    @pytest.mark.slow
    def test_beats_mean_fill(self, schedule_100):
        """Test that a trained model beats mean-value fill on held-out images."""
        model = build_tiny_denoiser()
        train_p2(
            model,
            make_toy_dataset(512, size=32, seed=0),
            schedule_100,
            steps=3000,
            batch=16,
            rng=make_rng(0),
        )
        held_out = make_toy_dataset(20, size=32, seed=1)
        mask = generate_mask(MaskKind.HALF, 32, 32, make_rng(0))
        params = StageParams(T=100, m=1, n=0, s=1, eta=1.0)

        gen = make_rng(2)
        sampled = [
            evaluate(single_stage_inpaint(schedule_100, model, x, mask, params, gen), x)
            for x in held_out
        ]
        filled = [evaluate(mean_fill(x, mask), x) for x in held_out]
        ours, naive = corpus_mean(sampled), corpus_mean(filled)

        assert ours.ssim > naive.ssim
        assert ours.rel_l1_pct < naive.rel_l1_pct
