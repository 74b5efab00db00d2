"""
Command-line interface: ``diffpaint <command> [options]``.

Commands: train, inpaint, maskgen, metrics, bench, sweep, run, toydata.
Logging verbosity comes from the CFS_LOG environment variable
(error, info or debug).
"""

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import orjson

from .checkpoint import save_model
from .config import RunConfig, load_run_config, parse_overrides
from .denoiser import Denoiser, build_tiny_denoiser
from .exceptions import ConfigError, DiffPaintError
from .field import make_rng
from .files import (
    IMAGE_SUFFIXES,
    CorpusItem,
    load_corpus,
    read_image,
    read_mask,
    write_image,
    write_latent,
    write_mask,
)
from .masks import generate_mask
from .metrics import evaluate
from .pipeline import (
    DEFAULT_STRATEGIES,
    Strategy,
    bench,
    load_denoisers,
    output_name,
    run_corpus,
    sweep,
    write_trace,
)
from .report import REPORT_VERSION, BenchReport
from .sampler import cfs_inpaint
from .schedule import NoiseSchedule
from .training import make_toy_dataset, train_p2
from .types import Field, MaskKind, P2Params

logger = logging.getLogger(__name__)

LOG_ENV = "CFS_LOG"
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
STRATEGY_NAMES = {
    "baseline": Strategy("baseline", ddim=False, cfs=False),
    "ddim": Strategy("ddim", ddim=True, cfs=False),
    "cfs": Strategy("cfs", ddim=False, cfs=True),
    "ddim+cfs": Strategy("ddim+cfs", ddim=True, cfs=True),
}


def setup_logging() -> None:
    """Configure root logging from CFS_LOG (default info)."""
    name = os.environ.get(LOG_ENV, "info").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(
        level=level if level is not None else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    if level is None:
        logger.warning("Unknown %s=%r, using info", LOG_ENV, name)


def _base_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    return cfg.replace(
        seed=args.seed,
        threads=args.threads,
        model=getattr(args, "model", None),
        coarse_model=getattr(args, "coarse_model", None),
        images=getattr(args, "images", None),
        masks=getattr(args, "masks", None),
    )


def _fit_resolution(cfg: RunConfig, side: int, explicit: bool) -> RunConfig:
    """Without a config file, run at the image's own resolution (coarse = 1/4)."""
    if explicit:
        return cfg
    coarse = side // 4 if side % 4 == 0 else side
    return cfg.replace(sampler=cfg.sampler.replace(fine_res=side, coarse_res=coarse))


def _write_json(data: dict[str, Any], file_path: Path | None) -> None:
    """Write a versioned JSON report to ``file_path``, or stdout when None."""
    raw = orjson.dumps({"version": REPORT_VERSION, **data}, option=orjson.OPT_INDENT_2)
    if file_path is None:
        sys.stdout.write(raw.decode("utf-8") + "\n")
    else:
        file_path.parent.mkdir(parents=True, exist_ok=True)
        file_path.write_bytes(raw)


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _base_config(args)
    schedule = cfg.schedule.build()
    if args.data:
        files = sorted(
            p for p in Path(args.data).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
        )
        data = [read_image(p) for p in files]
    else:
        data = make_toy_dataset(args.count, args.size, seed=args.seed)
    channels = data[0].shape[2] if data else 1

    model = build_tiny_denoiser(channels=channels, width=args.width, seed=args.seed)
    logger.info("Training TinyDenoiser with %d parameters", model.param_count())
    report = train_p2(
        model,
        data,
        schedule,
        P2Params(args.k_shift, args.gamma),
        steps=args.steps,
        batch=args.batch,
        lr=args.lr,
        rng=make_rng(args.seed),
        checkpoint_every=args.checkpoint_every,
        progress=args.progress,
    )
    save_model(model, args.out)
    if args.report:
        _write_json(report.to_dict(), args.report)
    logger.info(
        "Saved %s (loss %.5f -> %.5f)", args.out, report.initial_loss, report.final_loss
    )
    return 0


def cmd_inpaint(args: argparse.Namespace) -> int:
    known = read_image(args.image)
    mask = read_mask(args.mask)
    cfg = _fit_resolution(_base_config(args), known.shape[0], bool(args.config))
    schedule = cfg.validate()
    coarse, fine = load_denoisers(cfg)

    def dump(x0_coarse: Field) -> None:
        write_latent(x0_coarse, args.dump_coarse)

    pred, trace = cfs_inpaint(
        schedule,
        coarse,
        fine,
        known,
        mask,
        cfg.sampler,
        make_rng(args.seed),
        coarse_hook=dump if args.dump_coarse else None,
    )
    write_image(pred, args.out)
    if args.trace:
        write_trace(trace, args.trace)
    logger.info("Wrote %s (%d denoiser evaluations)", args.out, trace.evals())
    return 0


def cmd_maskgen(args: argparse.Namespace) -> int:
    height = args.height or args.size
    width = args.width or args.size
    missing_range = None
    if args.min_missing is not None or args.max_missing is not None:
        missing_range = (args.min_missing or 0.0, args.max_missing or 1.0)
    mask = generate_mask(
        args.kind, height, width, make_rng(args.seed), missing_range=missing_range
    )
    write_mask(mask, args.out)
    logger.info(
        "Wrote %s mask %s (%.1f%% known)", args.kind, args.out, 100 * mask.mean()
    )
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    report = evaluate(read_image(args.pred), read_image(args.ref))
    if args.json:
        _write_json(report.to_dict(), None)
    else:
        sys.stdout.write(
            f"ssim {report.ssim:.4f}  rel_l1 {report.rel_l1_pct:.3f}%  "
            f"psnr {report.psnr_db:.2f} dB\n"
        )
    return 0


def _load_bench_corpus(
    args: argparse.Namespace,
) -> tuple[RunConfig, list[CorpusItem], NoiseSchedule, Denoiser, Denoiser]:
    cfg = _base_config(args)
    if cfg.images is None or cfg.masks is None:
        raise ConfigError("bench and sweep need both images and masks folders")
    items, errors = load_corpus(cfg.images, cfg.masks, max_workers=cfg.threads)
    if errors:
        logger.warning("Skipping %d unreadable item(s)", len(errors))
    if items:
        cfg = _fit_resolution(cfg, items[0].image.shape[0], bool(args.config))
    schedule = cfg.validate()
    coarse, fine = load_denoisers(cfg)
    return cfg, items, schedule, coarse, fine


def _emit_bench(report: BenchReport, args: argparse.Namespace) -> None:
    report.to_json(args.out)
    if args.csv:
        report.export_csv(args.csv)
    for row in report.rows:
        logger.info(
            "%-12s time x%.2f  evals x%.2f", row.name, row.time_ratio, row.eval_ratio
        )
    if report.mean_fill is not None:
        logger.info("mean fill    ssim %.4f", report.mean_fill.ssim)


def cmd_bench(args: argparse.Namespace) -> int:
    cfg, items, schedule, coarse, fine = _load_bench_corpus(args)
    if args.strategies:
        try:
            strategies = [STRATEGY_NAMES[n.strip()] for n in args.strategies.split(",")]
        except KeyError as e:
            raise ConfigError(f"Unknown strategy {e.args[0]!r}") from e
    else:
        strategies = list(DEFAULT_STRATEGIES)
    report = bench(
        items, cfg.sampler, schedule, coarse, fine, strategies=strategies, seed=cfg.seed
    )
    _emit_bench(report, args)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg, items, schedule, coarse, fine = _load_bench_corpus(args)
    variants = [(text, parse_overrides(text)) for text in args.vary]
    report = sweep(items, cfg.sampler, variants, schedule, coarse, fine, seed=cfg.seed)
    _emit_bench(report, args)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _base_config(args).replace(out=args.out)
    report = run_corpus(cfg)
    if args.csv:
        report.export_csv(args.csv)
    return 1 if report.failed else 0


def cmd_toydata(args: argparse.Namespace) -> int:
    images_dir = args.out / "images"
    masks_dir = args.out / "masks"
    mask = generate_mask(MaskKind.HALF, args.size, args.size, make_rng(args.seed))
    for i, image in enumerate(make_toy_dataset(args.count, args.size, seed=args.seed)):
        stem = f"toy_{i:04d}"
        write_image(image, images_dir / output_name(stem, 1))
        write_mask(mask, masks_dir / f"{stem}.pgm")
    logger.info("Wrote %d toy image(s) to %s", args.count, args.out)
    return 0


def _add_global_flags(parser: argparse.ArgumentParser, defaults: bool) -> None:
    def default(value: Any) -> Any:
        return value if defaults else argparse.SUPPRESS

    parser.add_argument(
        "--seed", type=int, default=default(0), help="Random seed (default: 0)"
    )
    parser.add_argument(
        "--threads", type=int, default=default(None), help="Worker threads"
    )
    parser.add_argument("--config", type=Path, default=default(None), help="run.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffpaint",
        description="Coarse-to-fine diffusion inpainting with a light-weight denoiser.",
    )
    _add_global_flags(parser, defaults=True)
    # Global flags are also accepted after the command name.
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, defaults=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "train", parents=[common], help="Train a TinyDenoiser with P2 weighting"
    )
    p.add_argument("--out", type=Path, required=True, help="Output .lwdm file")
    p.add_argument("--data", type=Path, default=None, help="Folder of PGM/PPM images")
    p.add_argument("--count", type=int, default=256, help="Toy images if no --data")
    p.add_argument("--size", type=int, default=32, help="Toy image size")
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--width", type=int, default=32, help="Network width")
    p.add_argument("--k-shift", "--kshift", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--checkpoint-every", type=int, default=100)
    p.add_argument("--report", type=Path, default=None, help="Loss trace JSON")
    p.add_argument("--progress", action="store_true", help="Show a progress bar")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inpaint", parents=[common], help="Inpaint one image")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--coarse-model", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trace", type=Path, default=None)
    p.add_argument("--dump-coarse", type=Path, default=None, help="CFSF latent of x0")
    p.set_defaults(func=cmd_inpaint)

    p = sub.add_parser("maskgen", parents=[common], help="Generate a mask")
    p.add_argument("--kind", choices=[k.value for k in MaskKind], required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--min-missing", type=float, default=None)
    p.add_argument("--max-missing", type=float, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_maskgen)

    p = sub.add_parser(
        "metrics", parents=[common], help="Compare a prediction with a reference"
    )
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--json", action="store_true", help="Print a MetricReport JSON")
    p.set_defaults(func=cmd_metrics)

    for name, func, text in (
        ("bench", cmd_bench, "Compare speed-up strategies"),
        ("sweep", cmd_sweep, "Compare config variants"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--images", type=Path, required=True)
        p.add_argument("--masks", type=Path, required=True)
        p.add_argument("--model", type=Path, required=True)
        p.add_argument("--coarse-model", type=Path, default=None)
        p.add_argument("--out", type=Path, required=True, help="Report JSON")
        p.add_argument("--csv", type=Path, default=None)
        if name == "bench":
            p.add_argument(
                "--strategies",
                default=None,
                help=f"Comma-separated subset of {', '.join(STRATEGY_NAMES)}",
            )
        else:
            p.add_argument(
                "--vary",
                action="append",
                required=True,
                help='Config delta such as "Tc=100,Tf=50" (repeatable)',
            )
        p.set_defaults(func=func)

    p = sub.add_parser("run", parents=[common], help="Inpaint a corpus")
    p.add_argument("--images", type=Path, default=None)
    p.add_argument("--masks", type=Path, default=None)
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--coarse-model", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None, help="Output folder")
    p.add_argument("--csv", type=Path, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser(
        "toydata", parents=[common], help="Write a toy corpus with Half masks"
    )
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_toydata)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except DiffPaintError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
