"""
diffpaint: coarse-to-fine diffusion inpainting with a light-weight,
P2-weighted denoiser, DDIM striding and conditioned resampling.
"""

from .checkpoint import load_model, save_model
from .config import RunConfig, SamplerConfig, ScheduleSpec, load_run_config
from .denoiser import (
    AnalyticGaussianDenoiser,
    Denoiser,
    TinyDenoiser,
    build_tiny_denoiser,
)
from .exceptions import (
    ConfigError,
    DiffPaintError,
    FieldError,
    ImageReadError,
    MaskError,
    ModelFormatError,
    ReportError,
    SamplerError,
    ScheduleError,
    TrainingError,
)
from .field import (
    bilinear_resize,
    composite,
    fork_rng,
    gaussian_field,
    make_rng,
    mask_downsample,
)
from .files import load_corpus, read_image, read_mask, write_image, write_mask
from .masks import generate_mask
from .metrics import evaluate, psnr, rel_l1, ssim
from .pipeline import Strategy, bench, run_corpus, sweep
from .report import BenchReport, BenchRow, CorpusReport
from .sampler import (
    cdm,
    cfs_inpaint,
    count_evals,
    crm,
    ddim_step,
    ddpm_step,
    denoise_block,
    forward_diffuse,
    mean_fill,
    single_stage_inpaint,
)
from .schedule import NoiseSchedule, make_linear_schedule, p2_weight, snr
from .training import make_toy_dataset, train_p2
from .types import (
    EvalCost,
    Field,
    FilePath,
    MaskField,
    MaskKind,
    MetricReport,
    P2Params,
    RenoiseMode,
    StageParams,
    StepTrace,
)

__version__ = "0.1.0"

__all__ = [
    # Schedule and training
    "NoiseSchedule",
    "make_linear_schedule",
    "snr",
    "p2_weight",
    "train_p2",
    "make_toy_dataset",
    # Fields and files
    "make_rng",
    "fork_rng",
    "gaussian_field",
    "bilinear_resize",
    "mask_downsample",
    "composite",
    "generate_mask",
    "read_image",
    "write_image",
    "read_mask",
    "write_mask",
    "load_corpus",
    # Denoisers
    "Denoiser",
    "AnalyticGaussianDenoiser",
    "TinyDenoiser",
    "build_tiny_denoiser",
    "save_model",
    "load_model",
    # Sampling
    "forward_diffuse",
    "ddpm_step",
    "ddim_step",
    "cdm",
    "crm",
    "denoise_block",
    "single_stage_inpaint",
    "cfs_inpaint",
    "count_evals",
    "mean_fill",
    # Metrics and orchestration
    "ssim",
    "rel_l1",
    "psnr",
    "evaluate",
    "run_corpus",
    "bench",
    "sweep",
    "Strategy",
    "CorpusReport",
    "BenchReport",
    "BenchRow",
    # Configuration
    "SamplerConfig",
    "ScheduleSpec",
    "RunConfig",
    "load_run_config",
    # Exceptions
    "DiffPaintError",
    "ScheduleError",
    "FieldError",
    "MaskError",
    "ConfigError",
    "SamplerError",
    "ModelFormatError",
    "TrainingError",
    "ImageReadError",
    "ReportError",
    # Types and constants
    "Field",
    "MaskField",
    "FilePath",
    "MaskKind",
    "RenoiseMode",
    "P2Params",
    "StageParams",
    "StepTrace",
    "EvalCost",
    "MetricReport",
    # Metadata
    "__version__",
]
