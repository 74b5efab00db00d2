"""
Reverse-process machinery: forward diffusion, DDPM/DDIM steps, conditioned
denoising (CDM) and resampling (CRM) modules, Denoise Blocks, and the
single-stage and coarse-to-fine inpainting pipelines.

Every stochastic operation draws from an explicit ``rng``; the order of draws
is part of the contract, so a fixed seed reproduces a run bit for bit.
"""

import math
import time
from collections.abc import Callable
from typing import TYPE_CHECKING

import numpy as np

from .denoiser import Denoiser
from .exceptions import SamplerError
from .field import (
    bilinear_resize,
    check_mask_matches,
    check_same_shape,
    composite,
    gaussian_field,
    mask_downsample,
)
from .schedule import NoiseSchedule
from .types import (
    EvalCost,
    Field,
    MaskField,
    OpKinds,
    RenoiseMode,
    Rng,
    StageParams,
    Stages,
    StepTrace,
)

if TYPE_CHECKING:
    from .config import SamplerConfig


def forward_diffuse(sched: NoiseSchedule, x0: Field, t: int, eps: Field) -> Field:
    """Sample q(x_t | x_0): sqrt(ab_t) x0 + sqrt(1 - ab_t) eps. t = 0 returns x0."""
    sched.check_level(t)
    check_same_shape(x0, eps)
    if t == 0:
        return x0.copy()
    ab = float(sched.alpha_bar[t])
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps


def ddpm_step(
    sched: NoiseSchedule, model: Denoiser, x_t: Field, t: int, rng: Rng
) -> Field:
    """
    One ancestral step x_t -> x_{t-1} with fixed variance
    beta_t (1 - ab_{t-1}) / (1 - ab_t). No noise is drawn at t = 1.
    """
    sched.check_step(t)
    eps = model.predict(x_t, t)
    beta = float(sched.beta[t])
    alpha = float(sched.alpha[t])
    ab = float(sched.alpha_bar[t])
    ab_prev = float(sched.alpha_bar[t - 1])

    mean = (x_t - beta / math.sqrt(1.0 - ab) * eps) / math.sqrt(alpha)
    if t == 1:
        return mean
    var = beta * (1.0 - ab_prev) / (1.0 - ab)
    return mean + math.sqrt(var) * rng.standard_normal(x_t.shape)


def ddim_sigma(sched: NoiseSchedule, t: int, s: int, eta: float) -> float:
    """Noise scale of a DDIM step t -> t - s."""
    ab = float(sched.alpha_bar[t])
    ab_prev = float(sched.alpha_bar[t - s])
    return eta * math.sqrt((1.0 - ab_prev) / (1.0 - ab)) * math.sqrt(1.0 - ab / ab_prev)


def ddim_step(
    sched: NoiseSchedule,
    model: Denoiser,
    x_t: Field,
    t: int,
    s: int,
    eta: float,
    rng: Rng,
) -> Field:
    """
    One DDIM step x_t -> x_{t-s}.

    With eta = 0 the step is deterministic and draws nothing from ``rng``;
    noise is drawn only when sigma_t > 0.

    Raises:
        SamplerError: If t - s < 0, s < 1 or eta is outside [0, 1]
    """
    sched.check_step(t)
    if s < 1 or t - s < 0:
        raise SamplerError(f"Cannot step from {t} with stride {s}", t)
    if not 0.0 <= eta <= 1.0:
        raise SamplerError(f"eta must be in [0, 1], got {eta}", t)

    eps = model.predict(x_t, t)
    ab = float(sched.alpha_bar[t])
    ab_prev = float(sched.alpha_bar[t - s])
    sigma = ddim_sigma(sched, t, s, eta)

    x0_hat = (x_t - math.sqrt(1.0 - ab) * eps) / math.sqrt(ab)
    direction = math.sqrt(max(1.0 - ab_prev - sigma * sigma, 0.0))
    out = math.sqrt(ab_prev) * x0_hat + direction * eps
    if sigma > 0.0:
        out = out + sigma * rng.standard_normal(x_t.shape)
    return out


def cdm(
    sched: NoiseSchedule,
    model: Denoiser,
    x_t: Field,
    t: int,
    s: int,
    eta: float,
    known: Field,
    m: MaskField,
    rng: Rng,
    *,
    trace: StepTrace | None = None,
    stage: str = Stages.FINE,
) -> Field:
    """
    Conditioned denoising: a DDIM step for the unknown region, composited with
    the known image diffused to level t - s (the image itself at level 0).
    """
    check_same_shape(x_t, known)
    check_mask_matches(x_t, m)
    unknown = ddim_step(sched, model, x_t, t, s, eta, rng)
    t_next = t - s
    noise = rng.standard_normal(known.shape)
    known_t = forward_diffuse(sched, known, t_next, noise) if t_next > 0 else known
    if trace is not None:
        trace.record(OpKinds.CDM, t, t_next, x_t.shape[0], 1, stage)
    return composite(known_t, unknown, m)


def renoise(
    sched: NoiseSchedule,
    x_t: Field,
    t: int,
    target: int,
    rng: Rng,
    mode: RenoiseMode = RenoiseMode.JUMP,
) -> Field:
    """Lift x_t from level t to level target (see RenoiseMode)."""
    z = rng.standard_normal(x_t.shape)
    if mode is RenoiseMode.JUMP:
        ratio = float(sched.alpha_bar[target] / sched.alpha_bar[t])
    else:
        ratio = float(sched.alpha_bar[target])
    return math.sqrt(ratio) * x_t + math.sqrt(1.0 - ratio) * z


def crm(
    sched: NoiseSchedule,
    model: Denoiser,
    x_t: Field,
    t: int,
    crm_k: int,
    s: int,
    eta: float,
    known: Field,
    m: MaskField,
    rng: Rng,
    *,
    renoise_mode: RenoiseMode = RenoiseMode.JUMP,
    trace: StepTrace | None = None,
    stage: str = Stages.FINE,
) -> Field:
    """
    Conditioned resampling: renoise x_t to level t + crm_k * s, then run crm_k
    CDMs with stride s back down to t. crm_k = 0 is the identity.

    Raises:
        SamplerError: If the renoise target exceeds T or t < 0
    """
    if crm_k == 0:
        return x_t.copy()
    target = t + crm_k * s
    if t < 0 or crm_k < 0 or target > sched.T:
        raise SamplerError(f"Renoise target {target} outside 0..{sched.T}", t)

    x = renoise(sched, x_t, t, target, rng, renoise_mode)
    if trace is not None:
        trace.record(OpKinds.RENOISE, t, target, x_t.shape[0], 0, stage)
    level = target
    for _ in range(crm_k):
        x = cdm(sched, model, x, level, s, eta, known, m, rng, trace=trace, stage=stage)
        level -= s
    return x


def denoise_block(
    sched: NoiseSchedule,
    model: Denoiser,
    x_t: Field,
    t: int,
    m_count: int,
    n_count: int,
    crm_k: int,
    s: int,
    eta: float,
    known: Field,
    mask: MaskField,
    rng: Rng,
    *,
    renoise_mode: RenoiseMode = RenoiseMode.JUMP,
    trace: StepTrace | None = None,
    stage: str = Stages.FINE,
) -> Field:
    """
    m_count CDMs followed by n_count CRMs.

    The state returned sits at level max(t - m_count * s, 0): only the last CDM
    may shorten its stride to land exactly on 0.

    Raises:
        SamplerError: If a CDM other than the last would start at level <= 0
    """
    x = x_t
    level = t
    for _ in range(m_count):
        if level <= 0:
            raise SamplerError(
                f"Block of {m_count} CDMs with stride {s} underflows from t={t}", t
            )
        step = min(s, level)
        x = cdm(
            sched,
            model,
            x,
            level,
            step,
            eta,
            known,
            mask,
            rng,
            trace=trace,
            stage=stage,
        )
        level -= step
    for _ in range(n_count):
        x = crm(
            sched,
            model,
            x,
            level,
            crm_k,
            s,
            eta,
            known,
            mask,
            rng,
            renoise_mode=renoise_mode,
            trace=trace,
            stage=stage,
        )
    return x


def plan_blocks(T: int, s: int, m: int) -> list[int]:
    """
    CDM counts per block for a stage of T levels with stride s.

    ceil(T / s) CDMs are grouped into floor(steps / m) full blocks of m plus one
    truncated block holding the remainder.
    """
    steps = -(-T // s)
    full, rem = divmod(steps, m)
    return [m] * full + ([rem] if rem else [])


def block_levels(T: int, s: int, m: int) -> list[int]:
    """Level reached after each block of plan_blocks(T, s, m)."""
    levels = []
    level = T
    for count in plan_blocks(T, s, m):
        level = max(level - count * s, 0)
        levels.append(level)
    return levels


def stage_evals(params: StageParams) -> int:
    """Denoiser evaluations of one stage: one per CDM, crm_k per CRM."""
    blocks = plan_blocks(params.T, params.s, params.m)
    return sum(blocks) + len(blocks) * params.n * params.crm_k


def run_stage(
    sched: NoiseSchedule,
    model: Denoiser,
    x_t: Field,
    known: Field,
    mask: MaskField,
    params: StageParams,
    rng: Rng,
    *,
    trace: StepTrace | None = None,
    stage: str = Stages.FINE,
) -> Field:
    """Run the Denoise Blocks of one stage from level params.T down to 0."""
    if not model.supports(x_t.shape):
        raise SamplerError(f"Denoiser does not support shape {x_t.shape}")
    if params.T > sched.T:
        raise SamplerError(f"Stage starts at {params.T} > T={sched.T}", params.T)
    x = x_t
    level = params.T
    for count in plan_blocks(params.T, params.s, params.m):
        x = denoise_block(
            sched,
            model,
            x,
            level,
            count,
            params.n,
            params.crm_k,
            params.s,
            params.eta,
            known,
            mask,
            rng,
            renoise_mode=params.renoise_mode,
            trace=trace,
            stage=stage,
        )
        level = max(level - count * params.s, 0)
    return x


def single_stage_inpaint(
    sched: NoiseSchedule,
    model: Denoiser,
    known: Field,
    mask: MaskField,
    params: StageParams,
    rng: Rng,
    *,
    trace: StepTrace | None = None,
    stage: str = Stages.FINE,
) -> Field:
    """
    Inpaint from pure noise x_T ~ N(0, I) at the known image's resolution.

    The result is composited with ``known`` so the known region is exact.

    Raises:
        SamplerError: If the denoiser cannot run at this resolution
    """
    check_mask_matches(known, mask)
    if not model.supports(known.shape):
        raise SamplerError(f"Denoiser does not support shape {known.shape}")
    x = gaussian_field(rng, *known.shape)
    x = run_stage(sched, model, x, known, mask, params, rng, trace=trace, stage=stage)
    return composite(known, x, mask)


def cfs_inpaint(
    sched: NoiseSchedule,
    coarse_model: Denoiser,
    fine_model: Denoiser,
    known: Field,
    mask: MaskField,
    cfg: "SamplerConfig",
    rng: Rng,
    *,
    coarse_hook: Callable[[Field], None] | None = None,
) -> tuple[Field, StepTrace]:
    """
    Coarse-to-fine inpainting.

    The coarse stage samples x_0^c at coarse_res from noise, conditioned on the
    bilinearly downsized image and the conservatively downsampled mask. x_0^c is
    upsampled, diffused to T_f, and refined at fine_res. With cfg.cfs disabled
    the run is a single full-resolution stage driven by (T_c, m_c, n_c).

    Args:
        sched: Noise schedule
        coarse_model: Denoiser for the coarse stage
        fine_model: Denoiser for the refinement (or single) stage
        known: (fine_res, fine_res, c) input image
        mask: (fine_res, fine_res) mask, True = known
        cfg: Sampler configuration
        rng: Generator for every draw of the run
        coarse_hook: Called with x_0^c when the coarse stage finishes

    Returns:
        The inpainted image and the StepTrace of the run

    Raises:
        ConfigError: If cfg is invalid for sched
        SamplerError: On resolution mismatch or unsupported denoiser shapes
    """
    cfg.validate(sched)
    fr = cfg.fine_res
    if known.shape[:2] != (fr, fr):
        raise SamplerError(f"Image is {known.shape[:2]}, config expects {fr}x{fr}")
    check_mask_matches(known, mask)
    trace = StepTrace()

    if not cfg.cfs:
        start = time.perf_counter()
        out = single_stage_inpaint(
            sched, fine_model, known, mask, cfg.coarse_stage(), rng, trace=trace
        )
        trace.stage_seconds[Stages.FINE] = time.perf_counter() - start
        return out, trace

    cr = cfg.coarse_res
    start = time.perf_counter()
    coarse_known = bilinear_resize(known, cr, cr)
    coarse_mask = mask_downsample(mask, fr // cr)
    x0_coarse = single_stage_inpaint(
        sched,
        coarse_model,
        coarse_known,
        coarse_mask,
        cfg.coarse_stage(),
        rng,
        trace=trace,
        stage=Stages.COARSE,
    )
    trace.stage_seconds[Stages.COARSE] = time.perf_counter() - start
    if coarse_hook is not None:
        coarse_hook(x0_coarse)

    start = time.perf_counter()
    if not fine_model.supports(known.shape):
        raise SamplerError(f"Denoiser does not support shape {known.shape}")
    upsampled = bilinear_resize(x0_coarse, fr, fr)
    x = forward_diffuse(sched, upsampled, cfg.t_f, gaussian_field(rng, *known.shape))
    trace.record(OpKinds.DIFFUSE, 0, cfg.t_f, fr, 0, Stages.FINE)
    x = run_stage(
        sched, fine_model, x, known, mask, cfg.fine_stage(), rng, trace=trace
    )
    out = composite(known, x, mask)
    trace.stage_seconds[Stages.FINE] = time.perf_counter() - start
    return out, trace


def count_evals(cfg: "SamplerConfig", sched: NoiseSchedule) -> EvalCost:
    """
    Predict per-stage denoiser evaluations from the block tiling rule.

    Matches StepTrace.evals() of an actual cfs_inpaint run exactly.
    """
    cfg.validate(sched)
    if not cfg.cfs:
        fine = stage_evals(cfg.coarse_stage())
        return EvalCost(0, fine, cfg.coarse_res, cfg.fine_res)
    return EvalCost(
        stage_evals(cfg.coarse_stage()),
        stage_evals(cfg.fine_stage()),
        cfg.coarse_res,
        cfg.fine_res,
    )


def mean_fill(known: Field, mask: MaskField) -> Field:
    """Naive baseline: fill missing pixels with the known region's channel mean."""
    check_mask_matches(known, mask)
    if mask.any():
        fill = known[mask].mean(axis=0)
    else:
        fill = np.full(known.shape[2], 0.5)
    return composite(known, np.broadcast_to(fill, known.shape).copy(), mask)
