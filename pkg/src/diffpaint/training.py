"""
P2-weighted training of TinyDenoiser and the procedural toy dataset.
"""

import logging
import math
import time
from collections.abc import Sequence

import numpy as np
import torch
from torch import Tensor
from tqdm import tqdm

from .denoiser import TinyDenoiser
from .exceptions import TrainingError
from .field import make_rng
from .schedule import NoiseSchedule, p2_weights
from .types import Field, P2Params, Rng, TrainCheckpoint, TrainReport

logger = logging.getLogger(__name__)

DEFAULT_LR = 1e-4
DEFAULT_CLIP_NORM = 1.0


def make_toy_image(rng: Rng, size: int = 32) -> Field:
    """One grayscale image: 1-3 ellipses/rectangles on a linear gradient."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
    angle = rng.uniform(0.0, 2.0 * math.pi)
    ramp = math.cos(angle) * xx + math.sin(angle) * yy
    ramp = (ramp - ramp.min()) / max(float(np.ptp(ramp)), 1e-12)
    lo = rng.uniform(0.05, 0.45)
    img = lo + rng.uniform(0.1, 0.4) * ramp

    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(0.15, 0.85, size=2)
        ry, rx = rng.uniform(0.08, 0.3, size=2)
        if rng.random() < 0.5:
            inside = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            inside = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        img = np.where(inside, rng.uniform(0.0, 1.0), img)
    return np.clip(img, 0.0, 1.0)[:, :, None]


def make_toy_dataset(count: int, size: int = 32, seed: int = 0) -> list[Field]:
    """Generate ``count`` toy images reproducibly from ``seed``."""
    rng = make_rng(seed)
    return [make_toy_image(rng, size) for _ in range(count)]


def p2_loss(
    model: TinyDenoiser,
    x0: Tensor,
    t: Tensor,
    eps: Tensor,
    alpha_bar: Tensor,
    weights: Tensor,
) -> Tensor:
    """
    Batch P2-weighted noise-prediction loss.

    Args:
        model: Network under training
        x0: (batch, c, h, w) clean images
        t: (batch,) integer steps in 1..T
        eps: (batch, c, h, w) noise used to build x_t
        alpha_bar: (T+1,) cumulative products
        weights: (T+1,) per-step loss weights

    Returns:
        Scalar mean over the batch of weight_t * mean((eps - eps_hat)^2)
    """
    ab = alpha_bar[t][:, None, None, None]
    x_t = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * eps
    pred = model(x_t, t.to(x0.dtype))
    mse = ((eps - pred) ** 2).flatten(1).mean(dim=1)
    return (weights[t] * mse).mean()


def _stack(data: Sequence[Field], dtype: torch.dtype) -> Tensor:
    if len(data) == 0:
        raise TrainingError("Training data is empty")
    shapes = {x.shape for x in data}
    if len(shapes) != 1:
        raise TrainingError(
            "Training images must share one shape", diagnostics={"shapes": shapes}
        )
    arr = np.stack([x.transpose(2, 0, 1) for x in data])
    return torch.from_numpy(arr).to(dtype)


def train_p2(
    model: TinyDenoiser,
    data: Sequence[Field],
    sched: NoiseSchedule,
    p: P2Params | None = None,
    steps: int = 3000,
    batch: int = 16,
    lr: float = DEFAULT_LR,
    rng: Rng | None = None,
    *,
    checkpoint_every: int = 100,
    clip_norm: float = DEFAULT_CLIP_NORM,
    progress: bool = False,
) -> TrainReport:
    """
    Optimize the P2-weighted objective with Adam; parameters update in place.

    Each step draws t uniformly from 1..T, noise from ``rng`` and images with
    replacement, so a fixed seed reproduces the run exactly.

    Args:
        model: Network to train
        data: Clean (h, w, c) training images
        sched: Noise schedule
        p: P2 weighting parameters (default k_shift=1, gamma=1)
        steps: Optimizer steps
        batch: Images per step
        lr: Adam learning rate
        rng: Generator for batches, steps and noise (default seed 0)
        checkpoint_every: Steps averaged into each report checkpoint
        clip_norm: Gradient-norm clip threshold
        progress: Show a tqdm progress bar

    Returns:
        TrainReport: Mean loss per checkpoint interval

    Raises:
        TrainingError: On empty data, steps < 1 or a non-finite loss
    """
    if steps < 1:
        raise TrainingError(f"steps must be >= 1, got {steps}")
    rng = rng or make_rng(0)
    dtype = next(model.parameters()).dtype
    images = _stack(data, dtype)
    n, c, h, w = images.shape

    alpha_bar = torch.from_numpy(sched.alpha_bar.copy()).to(dtype)
    weights = torch.from_numpy(p2_weights(sched, p)).to(dtype)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)

    report = TrainReport()
    window: list[float] = []
    start = time.monotonic()
    model.train()

    for step in tqdm(range(1, steps + 1), disable=not progress, desc="train"):
        idx = torch.from_numpy(rng.integers(0, n, size=batch))
        t = torch.from_numpy(rng.integers(1, sched.T + 1, size=batch))
        eps = torch.from_numpy(rng.standard_normal((batch, c, h, w))).to(dtype)

        loss = p2_loss(model, images[idx], t, eps, alpha_bar, weights)
        value = float(loss.item())
        if not math.isfinite(value):
            raise TrainingError(
                "Non-finite loss",
                step,
                {"loss": value, "t": t.tolist(), "lr": lr},
            )

        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), clip_norm)
        optimizer.step()
        window.append(value)

        if step % checkpoint_every == 0 or step == steps:
            checkpoint = TrainCheckpoint(
                step=step,
                loss=float(np.mean(window)),
                lr=float(optimizer.param_groups[0]["lr"]),
                seconds=time.monotonic() - start,
            )
            report.checkpoints.append(checkpoint)
            logger.info(
                "step %d: p2 loss %.5f (%.1fs)",
                step,
                checkpoint.loss,
                checkpoint.seconds,
            )
            window = []

    return report
