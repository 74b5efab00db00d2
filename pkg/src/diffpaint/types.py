"""
Type definitions for diffpaint.
"""

from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any, Union

import numpy as np
from numpy.typing import NDArray

from .exceptions import ScheduleError

# Core data types
Field = NDArray[np.float64]
"""A real-valued (height, width, channels) grid: images, noise, latents."""

MaskField = NDArray[np.bool_]
"""A binary (height, width) grid, True = known pixel."""

Rng = np.random.Generator
FilePath = Union[str, Path]
Shape = tuple[int, int, int]


class MaskKind(StrEnum):
    """The six evaluation mask families."""

    WIDE = "wide"
    NARROW = "narrow"
    HALF = "half"
    EXPAND = "expand"
    ALT_LINES = "altlines"
    SUPER_RES_2X = "sr2x"


class RenoiseMode(StrEnum):
    """How a resampling module lifts x_t up to level t + k*s."""

    # q(x_{t+ks} | x_t): composition of the one-step kernel over k*s steps
    JUMP = "jump"
    # N(sqrt(abar_{t+ks}) x_t, (1 - abar_{t+ks}) I), treating x_t as clean data
    PAPER_LITERAL = "paper_literal"


# Step trace constants
class OpKinds:
    """Operation kinds recorded in a StepTrace."""

    CDM = "cdm"
    RENOISE = "renoise"
    DIFFUSE = "diffuse"


class Stages:
    """Stage names recorded in a StepTrace."""

    COARSE = "coarse"
    FINE = "fine"


@dataclass(frozen=True)
class P2Params:
    """Perception-prioritized loss weighting parameters."""

    k_shift: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not self.k_shift > 0:
            raise ScheduleError(f"k_shift must be > 0, got {self.k_shift}")
        if not self.gamma >= 0:
            raise ScheduleError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class StepEvent:
    """One recorded reverse-process operation."""

    kind: str
    t_from: int
    t_to: int
    resolution: int
    evals: int
    stage: str


@dataclass
class StepTrace:
    """Ordered record of the operations of one pipeline run."""

    events: list[StepEvent] = field(default_factory=list)
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def record(
        self,
        kind: str,
        t_from: int,
        t_to: int,
        resolution: int,
        evals: int,
        stage: str,
    ) -> None:
        """Append an event to the trace."""
        self.events.append(StepEvent(kind, t_from, t_to, resolution, evals, stage))

    def evals(self, stage: str | None = None) -> int:
        """Total denoiser evaluations, optionally for one stage only."""
        return sum(e.evals for e in self.events if stage is None or e.stage == stage)

    def timestep_path(self, stage: str) -> list[int]:
        """Sequence of levels visited by a stage, starting at its first level."""
        path: list[int] = []
        for event in self.events:
            if event.stage != stage:
                continue
            if not path:
                path.append(event.t_from)
            path.append(event.t_to)
        return path

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        """Convert to a JSON-ready dict; wall-clock data lives in stage_seconds."""
        data: dict[str, Any] = {
            "events": [
                {
                    "kind": e.kind,
                    "t_from": e.t_from,
                    "t_to": e.t_to,
                    "resolution": e.resolution,
                    "evals": e.evals,
                    "stage": e.stage,
                }
                for e in self.events
            ],
            "evals": {
                stage: self.evals(stage)
                for stage in dict.fromkeys(e.stage for e in self.events)
            },
        }
        if include_timing:
            data["stage_seconds"] = dict(self.stage_seconds)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StepTrace":
        """Rebuild a trace from to_dict output."""
        return cls(
            events=[StepEvent(**e) for e in data.get("events", [])],
            stage_seconds=dict(data.get("stage_seconds", {})),
        )


@dataclass(frozen=True)
class TrainCheckpoint:
    """Mean P2-weighted loss over one checkpoint interval."""

    step: int
    loss: float
    lr: float
    seconds: float


@dataclass
class TrainReport:
    """Loss trace of one training run."""

    checkpoints: list[TrainCheckpoint] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        """Loss of the first checkpoint."""
        return self.checkpoints[0].loss

    @property
    def final_loss(self) -> float:
        """Loss of the last checkpoint."""
        return self.checkpoints[-1].loss

    def to_dict(self) -> dict[str, Any]:
        return {
            "checkpoints": [
                {"step": c.step, "loss": c.loss, "lr": c.lr, "seconds": c.seconds}
                for c in self.checkpoints
            ]
        }


@dataclass(frozen=True)
class MetricReport:
    """Quality metrics of one prediction against its reference."""

    ssim: float
    rel_l1_pct: float
    psnr_db: float

    def to_dict(self) -> dict[str, float]:
        return {
            "ssim": self.ssim,
            "rel_l1_pct": self.rel_l1_pct,
            "psnr_db": self.psnr_db,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MetricReport":
        return cls(
            ssim=float(data["ssim"]),
            rel_l1_pct=float(data["rel_l1_pct"]),
            psnr_db=float(data["psnr_db"]),
        )


@dataclass(frozen=True)
class EvalCost:
    """Predicted denoiser evaluations of a sampler configuration."""

    coarse_evals: int
    fine_evals: int
    coarse_res: int
    fine_res: int

    @property
    def total_evals(self) -> int:
        return self.coarse_evals + self.fine_evals

    @property
    def weighted(self) -> float:
        """Fine-resolution-equivalent evaluations, costing (r / fine_res)^2."""
        scale = (self.coarse_res / self.fine_res) ** 2
        return self.coarse_evals * scale + self.fine_evals

    def to_dict(self) -> dict[str, Any]:
        return {
            "coarse_evals": self.coarse_evals,
            "fine_evals": self.fine_evals,
            "coarse_res": self.coarse_res,
            "fine_res": self.fine_res,
            "weighted": self.weighted,
        }


@dataclass(frozen=True)
class StageParams:
    """Parameters of one reverse-diffusion stage made of Denoise Blocks."""

    T: int
    m: int = 1
    n: int = 0
    crm_k: int = 1
    s: int = 1
    eta: float = 0.0
    renoise_mode: RenoiseMode = RenoiseMode.JUMP
