"""
Sampler, schedule and run configuration.

The JSON layout is the run.json format: sampler keys at the top level
(``Tc, Tf, mc, mf, nc, nf, s, k, coarse_res, fine_res, eta, renoise_mode,
cfs``), a ``schedule`` section, and the run keys (``model``, ``coarse_model``,
``images``, ``masks``, ``out``, ``seed``, ``threads``).
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import orjson

from .exceptions import ConfigError, ScheduleError
from .sampler import block_levels
from .schedule import NoiseSchedule, make_linear_schedule
from .types import FilePath, RenoiseMode, StageParams

# JSON key -> SamplerConfig attribute
SAMPLER_KEYS = {
    "Tc": "t_c",
    "Tf": "t_f",
    "mc": "m_c",
    "mf": "m_f",
    "nc": "n_c",
    "nf": "n_f",
    "s": "s",
    "k": "crm_k",
    "coarse_res": "coarse_res",
    "fine_res": "fine_res",
    "eta": "eta",
    "renoise_mode": "renoise_mode",
    "cfs": "cfs",
}
RUN_KEYS = ("model", "coarse_model", "images", "masks", "out", "seed", "threads")


@dataclass(frozen=True)
class SamplerConfig:
    """
    Hyper-parameters of one inpainting run.

    Defaults are the (T_c, T_f, m_c, m_f, n_c, n_f, s, k) tuple
    (250, 75, 3, 2, 8, 10, 5, 2) at 64 -> 256 resolution.
    """

    t_c: int = 250
    t_f: int = 75
    m_c: int = 3
    m_f: int = 2
    n_c: int = 8
    n_f: int = 10
    s: int = 5
    crm_k: int = 2
    coarse_res: int = 64
    fine_res: int = 256
    eta: float = 0.0
    renoise_mode: RenoiseMode = RenoiseMode.JUMP
    cfs: bool = True

    def coarse_stage(self) -> StageParams:
        """Stage parameters of the coarse stage (or the single stage)."""
        return StageParams(
            self.t_c,
            self.m_c,
            self.n_c,
            self.crm_k,
            self.s,
            self.eta,
            self.renoise_mode,
        )

    def fine_stage(self) -> StageParams:
        """Stage parameters of the refinement stage."""
        return StageParams(
            self.t_f,
            self.m_f,
            self.n_f,
            self.crm_k,
            self.s,
            self.eta,
            self.renoise_mode,
        )

    def problems(self, schedule: NoiseSchedule) -> list[str]:
        """Every invariant this config violates for ``schedule``."""
        found: list[str] = []
        if self.t_c < 1 or self.t_f < 1:
            found.append(f"Tc and Tf must be >= 1 (got {self.t_c}, {self.t_f})")
        if self.t_f > self.t_c:
            found.append(f"Tf={self.t_f} exceeds Tc={self.t_c}")
        if self.t_c > schedule.T:
            found.append(f"Tc={self.t_c} exceeds schedule T={schedule.T}")
        if self.s < 1:
            found.append(f"s must be >= 1, got {self.s}")
        if self.m_c < 1 or self.m_f < 1:
            found.append(f"mc and mf must be >= 1 (got {self.m_c}, {self.m_f})")
        if self.n_c < 0 or self.n_f < 0:
            found.append(f"nc and nf must be >= 0 (got {self.n_c}, {self.n_f})")
        if self.crm_k < 1:
            found.append(f"k must be >= 1, got {self.crm_k}")
        if not 0.0 <= self.eta <= 1.0:
            found.append(f"eta must be in [0, 1], got {self.eta}")
        if self.coarse_res < 1 or self.coarse_res > self.fine_res:
            found.append(
                f"Need 1 <= coarse_res <= fine_res (got {self.coarse_res}, "
                f"{self.fine_res})"
            )
        elif self.fine_res % self.coarse_res:
            found.append(
                f"fine_res={self.fine_res} is not a multiple of "
                f"coarse_res={self.coarse_res}"
            )
        if self.s >= 1 and self.m_c >= 1 and self.m_f >= 1 and self.t_c >= 1:
            stages = [("coarse", self.coarse_stage())]
            if self.cfs and self.t_f >= 1:
                stages.append(("fine", self.fine_stage()))
            for name, stage in stages:
                if stage.n == 0 or stage.T > schedule.T:
                    continue
                # Levels only decrease, so the first block renoises highest.
                first = block_levels(stage.T, stage.s, stage.m)[0]
                target = first + stage.crm_k * stage.s
                if target > schedule.T:
                    found.append(
                        f"{name} stage renoises to {target} > schedule T={schedule.T}"
                    )
        return found

    def validate(self, schedule: NoiseSchedule) -> None:
        """
        Raises:
            ConfigError: Listing every violated invariant
        """
        found = self.problems(schedule)
        if found:
            raise ConfigError("Invalid sampler config", found)

    def replace(self, **changes: Any) -> "SamplerConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        data = {key: getattr(self, attr) for key, attr in SAMPLER_KEYS.items()}
        data["renoise_mode"] = str(self.renoise_mode)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SamplerConfig":
        """
        Build from run.json keys; missing keys keep their defaults.

        Raises:
            ConfigError: On unknown keys or values of the wrong type
        """
        unknown = sorted(set(data) - set(SAMPLER_KEYS))
        if unknown:
            raise ConfigError(
                "Unknown sampler keys", [f"unknown key {k!r}" for k in unknown]
            )
        kwargs: dict[str, Any] = {}
        problems: list[str] = []
        for key, value in data.items():
            attr = SAMPLER_KEYS[key]
            try:
                if attr == "renoise_mode":
                    kwargs[attr] = RenoiseMode(value)
                elif attr == "cfs":
                    if not isinstance(value, bool):
                        raise TypeError(f"expected a boolean, got {value!r}")
                    kwargs[attr] = value
                elif attr == "eta":
                    kwargs[attr] = float(value)
                else:
                    if isinstance(value, bool) or int(value) != value:
                        raise TypeError(f"expected an integer, got {value!r}")
                    kwargs[attr] = int(value)
            except (TypeError, ValueError) as e:
                problems.append(f"{key}: {e}")
        if problems:
            raise ConfigError("Malformed sampler config", problems)
        return cls(**kwargs)


@dataclass(frozen=True)
class ScheduleSpec:
    """
    Linear beta schedule description.

    The default T=250, beta in [4e-4, 0.08] is the T=1000, [1e-4, 0.02] chain
    rescaled to 250 steps with a matching alpha_bar_T.
    """

    T: int = 250
    beta_start: float = 4e-4
    beta_end: float = 0.08
    type: str = "linear"

    def build(self) -> NoiseSchedule:
        if self.type != "linear":
            raise ConfigError(f"Unsupported schedule type: {self.type!r}")
        return make_linear_schedule(self.T, self.beta_start, self.beta_end)

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": self.type,
            "T": self.T,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScheduleSpec":
        try:
            return cls(
                T=int(data.get("T", cls.T)),
                beta_start=float(data.get("beta_start", cls.beta_start)),
                beta_end=float(data.get("beta_end", cls.beta_end)),
                type=str(data.get("type", cls.type)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Malformed schedule section: {e}") from e


@dataclass(frozen=True)
class RunConfig:
    """Everything a corpus run or bench needs besides the data itself."""

    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    model: Path | None = None
    coarse_model: Path | None = None
    images: Path | None = None
    masks: Path | None = None
    out: Path | None = None
    seed: int = 0
    threads: int | None = None

    def validate(self) -> NoiseSchedule:
        """
        Build the schedule and check the sampler config against it.

        Raises:
            ConfigError: If the schedule or sampler config is invalid
        """
        try:
            schedule = self.schedule.build()
        except ScheduleError as e:
            raise ConfigError(f"Invalid schedule: {e}") from e
        self.sampler.validate(schedule)
        return schedule

    def replace(self, **changes: Any) -> "RunConfig":
        """Copy with ``changes`` applied; None values are ignored."""
        return dataclasses.replace(
            self, **{k: v for k, v in changes.items() if v is not None}
        )

    def to_dict(self) -> dict[str, Any]:
        data = self.sampler.to_dict()
        data["schedule"] = self.schedule.to_dict()
        for key in RUN_KEYS:
            value = getattr(self, key)
            if value is not None:
                data[key] = str(value) if isinstance(value, Path) else value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        """
        Raises:
            ConfigError: On unknown keys or malformed values
        """
        unknown = sorted(set(data) - set(SAMPLER_KEYS) - set(RUN_KEYS) - {"schedule"})
        if unknown:
            raise ConfigError(
                "Unknown run keys", [f"unknown key {k!r}" for k in unknown]
            )

        paths = {
            key: Path(data[key]) if data.get(key) is not None else None
            for key in ("model", "coarse_model", "images", "masks", "out")
        }
        try:
            seed = int(data.get("seed", 0))
            threads = int(data["threads"]) if data.get("threads") is not None else None
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Malformed run config: {e}") from e

        return cls(
            sampler=SamplerConfig.from_dict(
                {k: v for k, v in data.items() if k in SAMPLER_KEYS}
            ),
            schedule=ScheduleSpec.from_dict(data.get("schedule", {})),
            seed=seed,
            threads=threads,
            **paths,
        )


def load_run_config(file_path: FilePath) -> RunConfig:
    """
    Load a run.json file.

    Raises:
        ConfigError: If the file is missing, not JSON, or malformed
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise ConfigError(f"Config file not found: {file_path}")
    try:
        data = orjson.loads(file_path.read_bytes())
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {file_path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config root must be an object: {file_path}")
    return RunConfig.from_dict(data)


def parse_overrides(text: str) -> dict[str, Any]:
    """
    Parse ``"Tc=100,Tf=50,renoise_mode=jump"`` into sampler key/value pairs.

    Values are read as JSON when possible and kept as strings otherwise.

    Raises:
        ConfigError: On an empty entry or a key that is not a sampler key
    """
    overrides: dict[str, Any] = {}
    for part in text.split(","):
        key, sep, raw = part.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"Expected key=value, got {part!r}")
        if key not in SAMPLER_KEYS:
            raise ConfigError(f"Unknown sampler key {key!r} in {text!r}")
        try:
            overrides[key] = orjson.loads(raw.strip())
        except orjson.JSONDecodeError:
            overrides[key] = raw.strip()
    return overrides


def apply_overrides(cfg: SamplerConfig, overrides: dict[str, Any]) -> SamplerConfig:
    """Copy of ``cfg`` with run.json-keyed ``overrides`` applied."""
    return SamplerConfig.from_dict({**cfg.to_dict(), **overrides})
