"""
Corpus runs, strategy benchmarking and configuration sweeps.
"""

import concurrent.futures
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import orjson

from .checkpoint import load_model
from .config import RunConfig, SamplerConfig, apply_overrides
from .denoiser import Denoiser
from .exceptions import ConfigError, DiffPaintError, SamplerError
from .field import fork_rng
from .files import CorpusItem, load_corpus, write_image
from .metrics import corpus_mean, evaluate
from .report import BenchReport, BenchRow, CorpusReport, ItemResult
from .sampler import cfs_inpaint, count_evals, mean_fill
from .schedule import NoiseSchedule
from .types import EvalCost, FilePath, MetricReport, Stages, StepTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Strategy:
    """A speed-up toggle combination of the bench grid."""

    name: str
    ddim: bool
    cfs: bool

    @property
    def is_baseline(self) -> bool:
        return not self.ddim and not self.cfs


BASELINE = Strategy("baseline", ddim=False, cfs=False)
DEFAULT_STRATEGIES = (
    BASELINE,
    Strategy("ddim", ddim=True, cfs=False),
    Strategy("ddim+cfs", ddim=True, cfs=True),
)


def strategy_config(base: SamplerConfig, strategy: Strategy) -> SamplerConfig:
    """
    Express a strategy as a delta on ``base``.

    The baseline is single-stage with one CDM and one single-step CRM per
    level; ``ddim`` keeps base.s (otherwise s = 1); ``cfs`` keeps the coarse
    stage (otherwise the run is single-stage with the coarse parameters).
    """
    if strategy.is_baseline:
        return base.replace(s=1, m_c=1, n_c=1, crm_k=1, cfs=False)
    return base.replace(s=base.s if strategy.ddim else 1, cfs=strategy.cfs)


def load_denoisers(cfg: RunConfig) -> tuple[Denoiser, Denoiser]:
    """
    Load (coarse, fine) denoisers; one model file serves both stages.

    Raises:
        ConfigError: If no model path is configured
        ModelFormatError: If a model file is unreadable
    """
    if cfg.model is None:
        raise ConfigError("No model file configured")
    fine = load_model(cfg.model)
    coarse = load_model(cfg.coarse_model) if cfg.coarse_model else fine
    return coarse, fine


def param_count(model: Denoiser) -> int:
    """Parameter count of a network denoiser; 0 for analytic ones."""
    counter = getattr(model, "param_count", None)
    return int(counter()) if callable(counter) else 0


def output_name(stem: str, channels: int) -> str:
    return f"{stem}.pgm" if channels == 1 else f"{stem}.ppm"


def write_trace(trace: StepTrace, file_path: FilePath) -> None:
    """Write a StepTrace as JSON."""
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    Path(file_path).write_bytes(
        orjson.dumps(trace.to_dict(), option=orjson.OPT_INDENT_2)
    )


def run_corpus(
    cfg: RunConfig,
    *,
    models: tuple[Denoiser, Denoiser] | None = None,
) -> CorpusReport:
    """
    Inpaint every image/mask pair of the configured corpus.

    Item i samples from fork_rng(cfg.seed, i), with i the position of its stem
    in sorted order, so results do not depend on worker scheduling. Failures
    are recorded per item and the run continues.

    Args:
        cfg: Run configuration (images, masks and optionally out are used)
        models: (coarse, fine) denoisers; loaded from cfg when omitted

    Returns:
        CorpusReport: Items in index order plus their metric mean

    Raises:
        ConfigError: If the config is invalid or corpus folders are missing
    """
    schedule = cfg.validate()
    if cfg.images is None or cfg.masks is None:
        raise ConfigError("Corpus runs need both images and masks folders")
    items, load_errors = load_corpus(cfg.images, cfg.masks, max_workers=cfg.threads)
    report = CorpusReport(config=cfg.to_dict())

    stems = sorted([item.stem for item in items] + list(load_errors))
    if not stems:
        logger.warning("Corpus is empty: %s", cfg.images)
        if cfg.out is not None:
            report.to_json(cfg.out / "report.json")
        return report
    coarse, fine = models or load_denoisers(cfg)
    index_of = {stem: i for i, stem in enumerate(stems)}

    def work(item: CorpusItem) -> ItemResult:
        index = index_of[item.stem]
        rng = fork_rng(cfg.seed, index)
        start = time.monotonic()
        try:
            pred, trace = cfs_inpaint(
                schedule, coarse, fine, item.image, item.mask, cfg.sampler, rng
            )
        except DiffPaintError as e:
            logger.error("Item %s failed: %s", item.stem, e)
            return ItemResult(index, item.stem, error=str(e))
        seconds = time.monotonic() - start

        result = ItemResult(
            index,
            item.stem,
            metrics=evaluate(pred, item.image),
            evals={stage: trace.evals(stage) for stage in (Stages.COARSE, Stages.FINE)},
            seconds=seconds,
            mean_fill=evaluate(mean_fill(item.image, item.mask), item.image),
        )
        if cfg.out is not None:
            out = cfg.out / output_name(item.stem, pred.shape[2])
            write_image(pred, out)
            write_trace(trace, cfg.out / f"{item.stem}.trace.json")
            result.output = out.name
        logger.info("%s: ssim %.4f in %.2fs", item.stem, result.metrics.ssim, seconds)
        return result

    results = [
        ItemResult(index_of[stem], stem, error=str(e))
        for stem, e in load_errors.items()
    ]
    with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        results.extend(executor.map(work, items))

    report.items = sorted(results, key=lambda r: r.index)
    report.mean = corpus_mean([r.metrics for r in report.items if r.metrics])
    report.mean_fill = corpus_mean([r.mean_fill for r in report.items if r.mean_fill])
    if cfg.out is not None:
        report.to_json(cfg.out / "report.json")
    logger.info(
        "Corpus done: %d item(s), %d failed", len(report.items), len(report.failed)
    )
    return report


def _measure(
    name: str,
    cfg: SamplerConfig,
    corpus: Sequence[CorpusItem],
    schedule: NoiseSchedule,
    coarse: Denoiser,
    fine: Denoiser,
    seed: int,
) -> BenchRow:
    """Run one config over the corpus; seconds and evals are per item."""
    predicted = count_evals(cfg, schedule)
    seconds = 0.0
    metrics: list[MetricReport] = []
    counts: set[tuple[int, int]] = set()
    for index, item in enumerate(corpus):
        rng = fork_rng(seed, index)
        start = time.monotonic()
        pred, trace = cfs_inpaint(
            schedule, coarse, fine, item.image, item.mask, cfg, rng
        )
        seconds += time.monotonic() - start
        metrics.append(evaluate(pred, item.image))
        counts.add((trace.evals(Stages.COARSE), trace.evals(Stages.FINE)))

    if len(counts) != 1:
        raise SamplerError(f"{name}: eval counts differ across items: {counts}")
    [(coarse_evals, fine_evals)] = counts
    measured = EvalCost(coarse_evals, fine_evals, cfg.coarse_res, cfg.fine_res)
    seconds /= len(corpus)

    row = BenchRow(
        name=name,
        ddim=cfg.s > 1,
        cfs=cfg.cfs,
        param_count=param_count(fine),
        config=cfg.to_dict(),
        seconds=seconds,
        coarse_evals=measured.coarse_evals,
        fine_evals=measured.fine_evals,
        weighted_evals=measured.weighted,
        predicted_weighted=predicted.weighted,
        metrics=corpus_mean(metrics),
    )
    logger.info(
        "%s: %.2fs per item, %.1f weighted evals (%d coarse, %d fine)",
        name,
        seconds,
        row.weighted_evals,
        row.coarse_evals,
        row.fine_evals,
    )
    return row


def _mean_fill_metrics(corpus: Sequence[CorpusItem]) -> MetricReport | None:
    return corpus_mean(
        [evaluate(mean_fill(item.image, item.mask), item.image) for item in corpus]
    )


def _set_ratios(rows: list[BenchRow]) -> None:
    reference = rows[0]
    for row in rows:
        row.time_ratio = reference.seconds / row.seconds if row.seconds > 0 else 1.0
        row.eval_ratio = reference.weighted_evals / row.weighted_evals


def bench(
    corpus: Sequence[CorpusItem],
    base: SamplerConfig,
    schedule: NoiseSchedule,
    coarse: Denoiser,
    fine: Denoiser,
    *,
    strategies: Sequence[Strategy] = DEFAULT_STRATEGIES,
    seed: int = 0,
) -> BenchReport:
    """
    Time each strategy over the corpus and compare it with the baseline.

    Rows come out baseline first, then in ``strategies`` order. Ratios are
    baseline / row, for both wall-clock time and cost-weighted evaluations.

    Raises:
        ConfigError: On an empty corpus, a grid without the baseline, or a
            strategy config that is invalid for ``schedule``
    """
    if not corpus:
        raise ConfigError("bench needs a non-empty corpus")
    baseline = [s for s in strategies if s.is_baseline]
    if not baseline:
        raise ConfigError("bench grid must include the baseline strategy")
    ordered = baseline[:1] + [s for s in strategies if not s.is_baseline]

    rows = [
        _measure(s.name, strategy_config(base, s), corpus, schedule, coarse, fine, seed)
        for s in ordered
    ]
    _set_ratios(rows)
    return BenchReport(rows=rows, mean_fill=_mean_fill_metrics(corpus))


def sweep(
    corpus: Sequence[CorpusItem],
    base: SamplerConfig,
    variants: Sequence[tuple[str, dict[str, Any]]],
    schedule: NoiseSchedule,
    coarse: Denoiser,
    fine: Denoiser,
    *,
    seed: int = 0,
) -> BenchReport:
    """
    Run named run.json-keyed deltas on ``base``; ratios are against the first.

    Raises:
        ConfigError: On an empty corpus or variant list, or an invalid variant
    """
    if not corpus:
        raise ConfigError("sweep needs a non-empty corpus")
    if not variants:
        raise ConfigError("sweep needs at least one variant")
    rows = [
        _measure(
            name, apply_overrides(base, delta), corpus, schedule, coarse, fine, seed
        )
        for name, delta in variants
    ]
    _set_ratios(rows)
    return BenchReport(rows=rows, mean_fill=_mean_fill_metrics(corpus))
