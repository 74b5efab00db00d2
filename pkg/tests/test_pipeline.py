"""
Tests for the pipeline module.
"""

import numpy as np
import orjson
import pytest

from diffpaint.checkpoint import save_model
from diffpaint.config import RunConfig, SamplerConfig
from diffpaint.denoiser import build_tiny_denoiser
from diffpaint.exceptions import ConfigError, SamplerError
from diffpaint.field import make_rng
from diffpaint.files import CorpusItem, load_corpus, read_image, read_mask
from diffpaint.masks import generate_mask
from diffpaint.pipeline import (
    BASELINE,
    DEFAULT_STRATEGIES,
    Strategy,
    bench,
    load_denoisers,
    output_name,
    param_count,
    run_corpus,
    strategy_config,
    sweep,
    write_trace,
)
from diffpaint.report import CorpusReport
from diffpaint.sampler import count_evals
from diffpaint.types import MaskKind, StepTrace


def _trace_without_timing(path):
    data = orjson.loads(path.read_bytes())
    data.pop("stage_seconds", None)
    return data


class TestRunCorpus:
    """Test cases for run_corpus."""

    def test_outputs(self, run_config, oracle):
        """Test images, traces and report written per item."""
        report = run_corpus(run_config, models=(oracle, oracle))
        out = run_config.out

        assert [item.index for item in report.items] == [0, 1, 2]
        assert report.failed == []
        assert report.mean is not None
        for stem in ("img_0", "img_1", "img_2"):
            assert (out / f"{stem}.pgm").exists()
            assert (out / f"{stem}.trace.json").exists()
        assert report.items[0].output == "img_0.pgm"
        assert report.items[0].evals == {"coarse": 15, "fine": 8}
        loaded = CorpusReport.from_json((out / "report.json").read_bytes())
        assert loaded.mean
        assert loaded.mean_fill == report.mean_fill
        assert all(item.mean_fill is not None for item in report.items)

    def test_known_region_preserved(self, run_config, oracle):
        """Test that written outputs keep the known pixels."""
        run_corpus(run_config, models=(oracle, oracle))

        original = read_image(run_config.images / "img_1.pgm")
        mask = read_mask(run_config.masks / "img_1.pgm")
        output = read_image(run_config.out / "img_1.pgm")
        assert np.array_equal(output[mask], original[mask])

    def test_deterministic_across_thread_counts(self, run_config, oracle, tmp_path):
        """Test byte-identical outputs for a fixed seed."""
        a = run_config.replace(out=tmp_path / "a", threads=1)
        b = run_config.replace(out=tmp_path / "b", threads=3)
        run_corpus(a, models=(oracle, oracle))
        run_corpus(b, models=(oracle, oracle))

        for stem in ("img_0", "img_1", "img_2"):
            image_a = (a.out / f"{stem}.pgm").read_bytes()
            assert image_a == (b.out / f"{stem}.pgm").read_bytes()
            assert _trace_without_timing(
                a.out / f"{stem}.trace.json"
            ) == _trace_without_timing(b.out / f"{stem}.trace.json")

    def test_seed_changes_output(self, run_config, oracle, tmp_path):
        """Test that a different seed gives a different sample."""
        a = run_config.replace(out=tmp_path / "a")
        b = run_config.replace(out=tmp_path / "b", seed=6)
        run_corpus(a, models=(oracle, oracle))
        run_corpus(b, models=(oracle, oracle))

        assert (a.out / "img_0.pgm").read_bytes() != (b.out / "img_0.pgm").read_bytes()

    def test_load_error_recorded(self, run_config, oracle):
        """Test that an unreadable item fails alone, keeping its index."""
        (run_config.masks / "img_1.pgm").unlink()

        report = run_corpus(run_config, models=(oracle, oracle))

        assert [item.index for item in report.items] == [0, 1, 2]
        assert [item.stem for item in report.failed] == ["img_1"]
        assert report.items[2].ok

    def test_empty_corpus(self, tmp_path, small_config, oracle):
        """Test that an empty corpus gives an empty report, still written."""
        (tmp_path / "i").mkdir()
        (tmp_path / "m").mkdir()
        images, masks, out = tmp_path / "i", tmp_path / "m", tmp_path / "out"
        cfg = RunConfig(sampler=small_config, images=images, masks=masks, out=out)

        report = run_corpus(cfg, models=(oracle, oracle))

        assert report.items == []
        assert report.mean is None
        written = CorpusReport.from_json((out / "report.json").read_bytes())
        assert written.items == []

    def test_missing_folders(self, small_config, oracle):
        """Test that corpus folders are required."""
        with pytest.raises(ConfigError):
            run_corpus(RunConfig(sampler=small_config), models=(oracle, oracle))

    def test_model_file(self, run_config, tmp_path):
        """Test loading a TinyDenoiser from the configured model path."""
        path = tmp_path / "tiny.lwdm"
        save_model(build_tiny_denoiser(width=16), path)

        report = run_corpus(run_config.replace(model=path))

        assert report.failed == []
        assert all(np.isfinite(item.metrics.ssim) for item in report.items)


class TestHelpers:
    """Test cases for the small pipeline helpers."""

    def test_output_name(self):
        """Test PGM for gray and PPM for color outputs."""
        assert output_name("x", 1) == "x.pgm"
        assert output_name("x", 3) == "x.ppm"

    def test_write_trace(self, tmp_path):
        """Test that traces are written as JSON."""
        trace = StepTrace()
        trace.record("cdm", 4, 2, 8, 1, "fine")
        path = tmp_path / "t" / "trace.json"

        write_trace(trace, path)

        assert orjson.loads(path.read_bytes())["evals"] == {"fine": 1}

    def test_param_count(self, oracle):
        """Test parameter counts of network and analytic denoisers."""
        model = build_tiny_denoiser(width=16)
        assert param_count(model) == model.param_count()
        assert param_count(oracle) == 0

    def test_load_denoisers(self, tmp_path):
        """Test that one model file serves both stages."""
        path = tmp_path / "m.lwdm"
        save_model(build_tiny_denoiser(width=16), path)

        coarse, fine = load_denoisers(RunConfig(model=path))

        assert coarse is fine
        with pytest.raises(ConfigError):
            load_denoisers(RunConfig())


class TestStrategies:
    """Test cases for strategy_config."""

    def test_baseline(self, small_config):
        """Test the per-step resampling baseline."""
        cfg = strategy_config(small_config, BASELINE)
        assert (cfg.s, cfg.m_c, cfg.n_c, cfg.crm_k, cfg.cfs) == (1, 1, 1, 1, False)

    def test_toggles(self, small_config):
        """Test that ddim keeps the stride and cfs keeps the coarse stage."""
        ddim = strategy_config(small_config, Strategy("ddim", ddim=True, cfs=False))
        cfs = strategy_config(small_config, Strategy("cfs", ddim=False, cfs=True))

        assert (ddim.s, ddim.cfs, ddim.n_c) == (2, False, 1)
        assert (cfs.s, cfs.cfs) == (1, True)


class TestBench:
    """Test cases for bench and sweep."""

    @pytest.fixture
    def corpus(self, corpus_dirs):
        items, _ = load_corpus(*corpus_dirs)
        return items

    def test_rows_and_ratios(self, corpus, small_config, run_schedule, oracle):
        """Test eval counts and ratios of the default grid."""
        report = bench(corpus, small_config, run_schedule, oracle, oracle)
        baseline, ddim, full = report.rows

        assert [r.name for r in report.rows] == ["baseline", "ddim", "ddim+cfs"]
        assert (baseline.fine_evals, ddim.fine_evals) == (40, 15)
        assert (full.coarse_evals, full.fine_evals) == (15, 8)
        assert full.weighted_evals == pytest.approx(11.75)
        assert baseline.eval_ratio == 1.0 and baseline.time_ratio == 1.0
        assert full.eval_ratio == pytest.approx(40 / 11.75)
        for row in report.rows:
            assert row.weighted_evals == pytest.approx(row.predicted_weighted)
            assert row.metrics is not None
            assert row.seconds > 0
        assert report.mean_fill is not None

    def test_baseline_first(self, corpus, small_config, run_schedule, oracle):
        """Test that the baseline row leads whatever the grid order."""
        strategies = list(reversed(DEFAULT_STRATEGIES))
        report = bench(
            corpus, small_config, run_schedule, oracle, oracle, strategies=strategies
        )
        assert [r.name for r in report.rows] == ["baseline", "ddim+cfs", "ddim"]

    def test_requires_baseline(self, corpus, small_config, run_schedule, oracle):
        """Test that grids without the baseline are rejected."""
        with pytest.raises(ConfigError):
            bench(
                corpus,
                small_config,
                run_schedule,
                oracle,
                oracle,
                strategies=DEFAULT_STRATEGIES[1:],
            )

    def test_empty_corpus(self, small_config, run_schedule, oracle):
        """Test that an empty corpus is rejected."""
        with pytest.raises(ConfigError):
            bench([], small_config, run_schedule, oracle, oracle)

    def test_seconds_per_item(self, corpus, small_config, run_schedule, oracle, mocker):
        """Test that row seconds are averaged over the corpus."""
        clock = mocker.patch("diffpaint.pipeline.time")
        clock.monotonic.side_effect = [float(t) for t in range(0, 60, 2)]

        report = bench(corpus, small_config, run_schedule, oracle, oracle)

        assert [row.seconds for row in report.rows] == [2.0, 2.0, 2.0]

    def test_eval_counts_must_agree(
        self, corpus, small_config, run_schedule, oracle, mocker
    ):
        """Test that items with different eval counts are rejected."""
        traces = []
        for evals in (5, 5, 6):
            trace = StepTrace()
            trace.record("cdm", 10, 0, 8, evals, "fine")
            traces.append((corpus[0].image, trace))
        mocker.patch("diffpaint.pipeline.cfs_inpaint", side_effect=traces)

        with pytest.raises(SamplerError, match="eval counts differ"):
            bench(corpus, small_config, run_schedule, oracle, oracle)

    def test_sweep(self, corpus, small_config, run_schedule, oracle):
        """Test named variants with ratios against the first."""
        variants = [("base", {}), ("short", {"Tc": 10, "Tf": 4})]

        report = sweep(corpus, small_config, variants, run_schedule, oracle, oracle)

        assert [r.name for r in report.rows] == ["base", "short"]
        assert report.row("short").config["Tc"] == 10
        assert report.rows[0].eval_ratio == 1.0
        assert report.row("short").eval_ratio > 1.0

    def test_sweep_invalid_variant(self, corpus, small_config, run_schedule, oracle):
        """Test that an invalid delta raises ConfigError."""
        variants = [("bad", {"Tf": 50})]
        with pytest.raises(ConfigError):
            sweep(corpus, small_config, variants, run_schedule, oracle, oracle)

    @pytest.mark.slow
    def test_speedup_ordering(self, run_schedule):
        """Test wall-clock ordering of the default grid with a tiny denoiser."""
        gen = make_rng(0)
        image = np.clip(0.5 + 0.1 * gen.standard_normal((64, 64, 1)), 0.0, 1.0)
        mask = generate_mask(MaskKind.HALF, 64, 64, gen)
        items = [CorpusItem("x", image, mask)]
        cfg = SamplerConfig(coarse_res=16, fine_res=64)
        model = build_tiny_denoiser()

        report = bench(items, cfg, run_schedule, model, model)
        baseline, ddim, full = report.rows

        def cost(strategy):
            return count_evals(strategy_config(cfg, strategy), run_schedule).weighted

        predicted = cost(BASELINE) / cost(DEFAULT_STRATEGIES[2])
        assert predicted == pytest.approx(500 / 195.125)
        assert baseline.seconds > ddim.seconds > full.seconds
        assert full.time_ratio == pytest.approx(predicted, rel=0.25)
