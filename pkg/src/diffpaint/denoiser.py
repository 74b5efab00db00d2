"""
Noise predictors eps_theta(x_t, t).

Two implementations share the Denoiser protocol: an exact posterior-mean
oracle for Gaussian data, and a small residual convolutional network.
"""

import math
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .exceptions import ConfigError, FieldError
from .field import check_same_shape
from .schedule import NoiseSchedule
from .types import Field, Shape

PARAM_BUDGET = 1_000_000


@runtime_checkable
class Denoiser(Protocol):
    """Anything that predicts the noise in x_t at step t."""

    def predict(self, x_t: Field, t: int) -> Field: ...

    def supports(self, shape: Shape) -> bool: ...


@dataclass(frozen=True, eq=False)
class AnalyticGaussianDenoiser:
    """
    Optimal noise predictor when x_0 ~ N(mu, sigma0_sq * I).

    ``mu`` is either a full (h, w, c) field or a (1, 1, c) per-channel mean,
    which broadcasts to any resolution with c channels.
    """

    mu: Field
    sigma0_sq: float
    schedule: NoiseSchedule

    def __post_init__(self) -> None:
        if not self.sigma0_sq > 0:
            raise ConfigError(f"sigma0_sq must be > 0, got {self.sigma0_sq}")
        if self.mu.ndim != 3 or not np.isfinite(self.mu).all():
            raise FieldError(
                "mu must be a finite (h, w, c) field", actual=self.mu.shape
            )

    @classmethod
    def constant(
        cls, mean: float, sigma0_sq: float, schedule: NoiseSchedule, channels: int = 1
    ) -> "AnalyticGaussianDenoiser":
        """Oracle for i.i.d. pixels with a scalar mean, valid at any resolution."""
        mu = np.full((1, 1, channels), float(mean), dtype=np.float64)
        return cls(mu=mu, sigma0_sq=sigma0_sq, schedule=schedule)

    def supports(self, shape: Shape) -> bool:
        h, w, c = shape
        if self.mu.shape[:2] == (1, 1):
            return c == self.mu.shape[2]
        return tuple(shape) == self.mu.shape

    def predict(self, x_t: Field, t: int) -> Field:
        return analytic_predict(self, x_t, t)


def analytic_predict(d: AnalyticGaussianDenoiser, x_t: Field, t: int) -> Field:
    """
    Posterior-mean noise prediction for Gaussian data.

    x0_hat = mu + sqrt(ab) s2 / (ab s2 + 1 - ab) * (x_t - sqrt(ab) mu)
    eps_hat = (x_t - sqrt(ab) x0_hat) / sqrt(1 - ab)
    """
    d.schedule.check_step(t)
    if not d.supports(x_t.shape):
        raise FieldError("Field does not match oracle mean", d.mu.shape, x_t.shape)
    ab = float(d.schedule.alpha_bar[t])
    sqrt_ab = math.sqrt(ab)
    gain = sqrt_ab * d.sigma0_sq / (ab * d.sigma0_sq + 1.0 - ab)
    x0_hat = d.mu + gain * (x_t - sqrt_ab * d.mu)
    return (x_t - sqrt_ab * x0_hat) / math.sqrt(1.0 - ab)


def timestep_embedding(t: Tensor, dim: int) -> Tensor:
    """Sinusoidal embedding of (batch,) timesteps into (batch, dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / half
    )
    args = t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class ResBlock(nn.Module):
    """GroupNorm-SiLU-conv residual block with an additive time projection."""

    def __init__(self, channels: int, time_dim: int, groups: int = 8):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, channels)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, channels)
        self.norm2 = nn.GroupNorm(groups, channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: Tensor, emb: Tensor) -> Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(emb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return x + h


class TinyDenoiser(nn.Module):
    """
    Light-weight noise predictor: four residual blocks at a fixed width, one
    2x down/up pair and a skip connection across it.

    The output convolution is zero-initialized, so a fresh model predicts 0.
    """

    def __init__(self, channels: int = 1, width: int = 32, embed_dim: int = 64):
        super().__init__()
        self.channels = channels
        self.width = width
        self.embed_dim = embed_dim
        time_dim = 2 * embed_dim

        self.time_mlp = nn.Sequential(
            nn.Linear(embed_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim)
        )
        self.conv_in = nn.Conv2d(channels, width, 3, padding=1)
        self.block1 = ResBlock(width, time_dim)
        self.down = nn.Conv2d(width, width, 3, stride=2, padding=1)
        self.block2 = ResBlock(width, time_dim)
        self.block3 = ResBlock(width, time_dim)
        self.up = nn.Conv2d(width, width, 3, padding=1)
        self.block4 = ResBlock(width, time_dim)
        self.norm_out = nn.GroupNorm(8, width)
        self.conv_out = nn.Conv2d(width, channels, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x: Tensor, t: Tensor) -> Tensor:
        emb = self.time_mlp(timestep_embedding(t.to(x.dtype), self.embed_dim))
        h1 = self.block1(self.conv_in(x), emb)
        h = self.block3(self.block2(self.down(h1), emb), emb)
        h = self.up(F.interpolate(h, size=h1.shape[-2:], mode="nearest"))
        h = self.block4(h + h1, emb)
        return self.conv_out(F.silu(self.norm_out(h)))

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def supports(self, shape: Shape) -> bool:
        h, w, c = shape
        return c == self.channels and h % 2 == 0 and w % 2 == 0 and h >= 2 and w >= 2

    def predict(self, x_t: Field, t: int) -> Field:
        return tiny_predict(self, x_t, t)


def tiny_predict(model: TinyDenoiser, x_t: Field, t: int) -> Field:
    """
    Deterministic forward pass on a single (h, w, c) field.

    Raises:
        FieldError: If the model cannot run at this shape
    """
    if not model.supports(x_t.shape):
        raise FieldError(
            f"TinyDenoiser({model.channels} ch) cannot run on this shape",
            actual=x_t.shape,
        )
    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(np.ascontiguousarray(x_t.transpose(2, 0, 1)))[None]
    steps = torch.tensor([float(t)], dtype=dtype)
    # No dropout or batch statistics, so train/eval mode does not matter here.
    with torch.no_grad():
        out = model(x.to(dtype), steps)
    eps = out[0].permute(1, 2, 0).to(torch.float64).numpy()
    check_same_shape(x_t, eps)
    return eps


def build_tiny_denoiser(
    channels: int = 1, width: int = 32, seed: int = 0
) -> TinyDenoiser:
    """Create a TinyDenoiser with weights initialized from ``seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = TinyDenoiser(channels=channels, width=width)
    return model
