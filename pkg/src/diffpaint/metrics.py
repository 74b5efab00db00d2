"""
Image quality metrics: SSIM, relative l1 and PSNR.
"""

import math
from collections.abc import Sequence

import numpy as np
from skimage.metrics import structural_similarity

from .exceptions import FieldError
from .field import check_same_shape
from .types import Field, MetricReport

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0
PSNR_CAP_DB = 100.0
PSNR_MIN_MSE = 1e-10


def ssim(a: Field, b: Field) -> float:
    """
    Mean structural similarity, averaged over channels.

    Gaussian-weighted local statistics (11x11 window, sigma 1.5) with
    population covariances; only fully covered window positions are averaged.

    Raises:
        FieldError: On shape mismatch or images smaller than the window
    """
    check_same_shape(a, b)
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise FieldError(
            f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}",
            actual=a.shape,
        )
    return float(
        structural_similarity(
            a,
            b,
            data_range=DATA_RANGE,
            channel_axis=2,
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
        )
    )


def rel_l1(a: Field, b_reference: Field) -> float:
    """Mean absolute error in percent of the [0, 1] range."""
    check_same_shape(a, b_reference)
    return 100.0 * float(np.mean(np.abs(a - b_reference)))


def psnr(a: Field, b: Field) -> float:
    """Peak signal-to-noise ratio in dB, capped for (near-)identical inputs."""
    check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < PSNR_MIN_MSE:
        return PSNR_CAP_DB
    return 10.0 * math.log10(DATA_RANGE**2 / mse)


def evaluate(pred: Field, ref: Field) -> MetricReport:
    """All three metrics of ``pred`` against ``ref``."""
    return MetricReport(
        ssim=ssim(pred, ref),
        rel_l1_pct=rel_l1(pred, ref),
        psnr_db=psnr(pred, ref),
    )


def corpus_mean(reports: Sequence[MetricReport]) -> MetricReport | None:
    """Per-metric mean over ``reports`` in their given order; None if empty."""
    if not reports:
        return None
    n = len(reports)
    return MetricReport(
        ssim=sum(r.ssim for r in reports) / n,
        rel_l1_pct=sum(r.rel_l1_pct for r in reports) / n,
        psnr_db=sum(r.psnr_db for r in reports) / n,
    )
