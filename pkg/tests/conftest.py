"""
Pytest configuration and shared fixtures for diffpaint tests.
"""

from pathlib import Path

import numpy as np
import orjson
import pytest

from diffpaint.config import RunConfig, SamplerConfig, ScheduleSpec
from diffpaint.denoiser import AnalyticGaussianDenoiser
from diffpaint.field import make_rng
from diffpaint.files import write_image, write_mask
from diffpaint.masks import generate_mask
from diffpaint.schedule import NoiseSchedule, make_linear_schedule
from diffpaint.types import Field, MaskKind, Shape


class ConstantDenoiser:
    """Predicts the same noise value everywhere, at every step."""

    def __init__(self, value: float = 0.0):
        self.value = value
        self.calls = 0

    def supports(self, shape: Shape) -> bool:
        return True

    def predict(self, x_t: Field, t: int) -> Field:
        self.calls += 1
        return np.full(x_t.shape, self.value)


@pytest.fixture
def tiny_schedule() -> NoiseSchedule:
    """T=4 schedule with beta = [0.1, 0.2, 0.3, 0.4]."""
    return make_linear_schedule(4, 0.1, 0.4)


@pytest.fixture
def schedule_100() -> NoiseSchedule:
    """Default-range linear schedule over 100 steps."""
    return make_linear_schedule(100)


@pytest.fixture
def run_schedule() -> NoiseSchedule:
    """The default run schedule (T=250)."""
    return ScheduleSpec().build()


@pytest.fixture
def oracle(run_schedule) -> AnalyticGaussianDenoiser:
    """Optimal denoiser for pixels ~ N(0.5, 0.01), valid at any resolution."""
    return AnalyticGaussianDenoiser.constant(0.5, 0.01, run_schedule)


@pytest.fixture
def zero_denoiser() -> ConstantDenoiser:
    """Denoiser that always predicts zero noise."""
    return ConstantDenoiser(0.0)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return make_rng(0)


@pytest.fixture
def small_config() -> SamplerConfig:
    """Cheap two-stage config: 8 -> 16 resolution, short chains."""
    return SamplerConfig(
        t_c=20,
        t_f=10,
        m_c=2,
        m_f=2,
        n_c=1,
        n_f=1,
        s=2,
        crm_k=1,
        coarse_res=8,
        fine_res=16,
    )


@pytest.fixture
def gaussian_image() -> Field:
    """16x16 grayscale image drawn from N(0.5, 0.01)."""
    return 0.5 + 0.1 * make_rng(42).standard_normal((16, 16, 1))


@pytest.fixture
def half_mask() -> np.ndarray:
    """16x16 Half mask (left half known)."""
    return generate_mask(MaskKind.HALF, 16, 16, make_rng(0))


@pytest.fixture
def corpus_dirs(tmp_path) -> tuple[Path, Path]:
    """Image and mask folders holding three 16x16 images with Half masks."""
    images = tmp_path / "images"
    masks = tmp_path / "masks"
    gen = make_rng(3)
    mask = generate_mask(MaskKind.HALF, 16, 16, gen)
    for i in range(3):
        image = np.clip(0.5 + 0.1 * gen.standard_normal((16, 16, 1)), 0.0, 1.0)
        write_image(image, images / f"img_{i}.pgm")
        write_mask(mask, masks / f"img_{i}.pgm")
    return images, masks


@pytest.fixture
def run_config(corpus_dirs, small_config, tmp_path) -> RunConfig:
    """RunConfig over corpus_dirs with the small sampler config."""
    images, masks = corpus_dirs
    return RunConfig(
        sampler=small_config,
        images=images,
        masks=masks,
        out=tmp_path / "out",
        seed=5,
    )


@pytest.fixture
def run_json(tmp_path, small_config) -> Path:
    """run.json file with the small sampler config and the default schedule."""
    data = small_config.to_dict()
    data["schedule"] = ScheduleSpec().to_dict()
    path = tmp_path / "run.json"
    path.write_bytes(orjson.dumps(data))
    return path
