"""
Diffusion noise schedules and the P2 loss-weighting terms.

Tables are indexed by timestep: ``beta[t]`` and ``alpha[t]`` are defined for
t = 1..T (index 0 is a placeholder), ``alpha_bar[t]`` for t = 0..T with
``alpha_bar[0] = 1`` meaning clean data.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .exceptions import ScheduleError
from .types import P2Params

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Immutable beta/alpha/alpha_bar tables of a discrete diffusion chain."""

    T: int
    beta: NDArray[np.float64]
    alpha: NDArray[np.float64]
    alpha_bar: NDArray[np.float64]

    def __post_init__(self) -> None:
        for table in (self.beta, self.alpha, self.alpha_bar):
            table.setflags(write=False)

    def check_step(self, t: int) -> None:
        """Raise ScheduleError unless 1 <= t <= T."""
        if not 1 <= t <= self.T:
            raise ScheduleError(f"Timestep {t} outside 1..{self.T}", t, self.T)

    def check_level(self, t: int) -> None:
        """Raise ScheduleError unless 0 <= t <= T."""
        if not 0 <= t <= self.T:
            raise ScheduleError(f"Level {t} outside 0..{self.T}", t, self.T)

    def __repr__(self) -> str:
        return (
            f"NoiseSchedule(T={self.T}, beta=[{self.beta[1]:.3g}.."
            f"{self.beta[self.T]:.3g}])"
        )


def _from_betas(betas: NDArray[np.float64]) -> NoiseSchedule:
    T = len(betas)
    beta = np.concatenate([[0.0], betas])
    alpha = 1.0 - beta
    alpha_bar = np.empty(T + 1, dtype=np.float64)
    alpha_bar[0] = 1.0
    # Sequential product keeps alpha_bar[t] == alpha_bar[t-1] * alpha[t] exactly.
    for t in range(1, T + 1):
        alpha_bar[t] = alpha_bar[t - 1] * alpha[t]
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def make_linear_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """
    Build a schedule with beta linear in t from beta_start (t=1) to beta_end (t=T).

    Args:
        T: Number of diffusion steps
        beta_start: beta_1
        beta_end: beta_T

    Returns:
        NoiseSchedule: The derived tables

    Raises:
        ScheduleError: If T < 1 or the bounds are not 0 < start <= end < 1
    """
    if T < 1:
        raise ScheduleError(f"T must be >= 1, got {T}", T=T)
    if not 0 < beta_start <= beta_end < 1:
        raise ScheduleError(
            f"Need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})",
            T=T,
        )
    if T == 1:
        betas = np.array([beta_start], dtype=np.float64)
    else:
        betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
        # linspace is exact at the first point; pin the last one too.
        betas[-1] = beta_end
    return _from_betas(betas)


def snr(sched: NoiseSchedule, t: int) -> float:
    """Signal-to-noise ratio of x_t: alpha_bar_t / (1 - alpha_bar_t)."""
    sched.check_step(t)
    ab = float(sched.alpha_bar[t])
    return ab / (1.0 - ab)


def lambda_simple(sched: NoiseSchedule, t: int) -> float:
    """Baseline loss weight (1 - beta_t)(1 - alpha_bar_t) / beta_t."""
    sched.check_step(t)
    beta = float(sched.beta[t])
    return (1.0 - beta) * (1.0 - float(sched.alpha_bar[t])) / beta


def p2_weight(sched: NoiseSchedule, t: int, p: P2Params | None = None) -> float:
    """Perception-prioritized weight lambda_t / (k_shift + SNR(t))^gamma."""
    p = p or P2Params()
    base = lambda_simple(sched, t)
    if p.gamma == 0:
        return base
    return base / (p.k_shift + snr(sched, t)) ** p.gamma


def p2_weights(sched: NoiseSchedule, p: P2Params | None = None) -> NDArray[np.float64]:
    """All P2 weights as a length-(T+1) table; entry 0 is unused and set to 0."""
    weights = np.zeros(sched.T + 1, dtype=np.float64)
    for t in range(1, sched.T + 1):
        weights[t] = p2_weight(sched, t, p)
    return weights
