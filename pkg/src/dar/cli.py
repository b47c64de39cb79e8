"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
Hyper-parameters come from a preset, then an optional JSON ``--config``,
then individual flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from dar.checkpoint import CheckpointError, load_checkpoint
from dar.codebook import Codebook, CodebookFormatError, load_codebook, make_codebook, render_pixels, save_codebook, write_ppm
from dar.config import ConfigError, RunConfig, load_run_config
from dar.grid_scan import GridShape, scan_report
from dar.harness.data import DatasetFormatError, generate_dataset, load_dataset, save_dataset

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
DATASET_FILE, CODEBOOK_FILE = "dataset.dards", "codebook.darcb"


class UsageError(Exception):
    pass


class ValidationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides config)")
    p.add_argument("--out", type=Path, default=None, help=out_help)


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="JSON run config (sections model/train/sample/dataset)")
    p.add_argument("--preset", choices=("desk", "tiny"), default="desk", help="base preset before --config")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dar", description="Direction-aware diagonal autoregressive generation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("scan", help="scan-order adjacency statistics as JSON")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--order", choices=("raster", "diagonal"), default="diagonal")
    _common(p, "write the JSON here instead of stdout")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset and codebook")
    _config_flags(p)
    p.add_argument("--family", choices=("constant", "stripes", "checker", "gradient"), default=None)
    p.add_argument("--noise", type=float, default=None, help="per-cell corruption rate")
    _common(p, "output directory (dataset.dards, codebook.darcb)")

    p = sub.add_parser("train", help="train a model")
    _config_flags(p)
    p.add_argument("--data", type=Path, default=None, help="directory written by gen-data")
    p.add_argument("--steps", type=int, default=None)
    _common(p, "output directory (checkpoint.darck, loss.csv)")

    p = sub.add_parser("sample", help="sample token grids from a checkpoint")
    _config_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--class", dest="class_label", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--guidance-scale", type=float, default=None)
    p.add_argument("--scale-power", type=float, default=None)
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--argmax", action="store_true", help="greedy decoding")
    p.add_argument("--render-scale", type=int, default=16, help="pixels per token in the PPM output")
    _common(p, "output directory (PPM images and manifest.json)")

    p = sub.add_parser("eval", help="evaluate a checkpoint against a dataset")
    _config_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--samples", type=int, default=8, help="sampled grids per class")
    _common(p, "write the JSON report here instead of stdout")

    p = sub.add_parser("ablate", help="run the module and AdaLN ablation matrices")
    _config_flags(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--workers", type=int, default=1, help="worker processes (capped by DAR_THREADS)")
    _common(p, "write the JSON report here instead of stdout")

    p = sub.add_parser("bench", help="sampling throughput")
    _config_flags(p)
    p.add_argument("--checkpoint", type=Path, default=None, help="defaults to a freshly initialized preset model")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--repeats", type=int, default=5)
    _common(p, "write the JSON result here instead of stdout")

    p = sub.add_parser("gradcheck", help="finite-difference check of model gradients")
    p.add_argument("--preset", choices=("tiny", "tiny4d"), default="tiny")
    p.add_argument("--tolerance", type=float, default=1e-3)
    _common(p, "write the JSON result here instead of stdout")
    return parser


# ------------------------------------------------------------------- helpers


def _run_config(args) -> RunConfig:
    from dar.presets import desk_run_config, tiny_run_config

    cfg = tiny_run_config() if args.preset == "tiny" else desk_run_config()
    if args.config is not None:
        cfg = load_run_config(args.config, cfg)
    if getattr(args, "seed", None) is not None:
        cfg = replace(
            cfg,
            train=replace(cfg.train, seed=args.seed),
            sample=replace(cfg.sample, seed=args.seed),
            dataset=replace(cfg.dataset, seed=args.seed),
        )
    return cfg


def _emit(payload: dict, out: Path | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out is None:
        print(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n")


def _require_out(args) -> Path:
    if args.out is None:
        raise UsageError(f"{args.command}: --out DIR is required")
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _load_data(data_dir: Path):
    ds_path, cb_path = data_dir / DATASET_FILE, data_dir / CODEBOOK_FILE
    for p in (ds_path, cb_path):
        if not p.is_file():
            raise ValidationError(f"missing data file: {p}")
    return load_dataset(ds_path), load_codebook(cb_path)


def _codebook_from_params(params) -> Codebook:
    return Codebook(params["codebook"].data.astype(np.float32))


def _load_ckpt(path: Path):
    if not path.is_file():
        raise ValidationError(f"checkpoint not found: {path}")
    return load_checkpoint(path)


# ---------------------------------------------------------------- subcommands


def cmd_scan(args) -> int:
    _emit(scan_report(GridShape(args.height, args.width), args.order), args.out)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    out = _require_out(args)
    cfg = _run_config(args)
    spec = cfg.dataset
    if args.family is not None:
        spec = replace(spec, family=args.family)
    if args.noise is not None:
        spec = replace(spec, noise_rate=args.noise)
    ds = generate_dataset(spec)
    cb = make_codebook(spec.K, cfg.model.code_dim, spec.seed)
    save_dataset(ds, out / DATASET_FILE)
    save_codebook(cb, out / CODEBOOK_FILE)
    (out / "dataset.json").write_text(
        json.dumps({"spec": spec.to_dict(), "fingerprint": ds.fingerprint(), "code_dim": cb.D}, indent=2, sort_keys=True)
        + "\n"
    )
    return EXIT_OK


def _train_config(args, cfg: RunConfig):
    tc = cfg.train_config()
    if getattr(args, "steps", None) is not None:
        tc = replace(tc, steps=args.steps, warmup_steps=min(tc.warmup_steps, args.steps))
    return tc


def _data_for(args, cfg: RunConfig):
    if args.data is not None:
        return _load_data(args.data)
    if cfg.train.dataset_path and cfg.train.codebook_path:
        return load_dataset(cfg.train.dataset_path), load_codebook(cfg.train.codebook_path)
    raise UsageError("train: pass --data DIR or set train.dataset_path and train.codebook_path")


def cmd_train(args) -> int:
    from dar.harness.train import train

    cfg = _run_config(args)
    out = _require_out(args)
    ds, cb = _data_for(args, cfg)
    result = train(_train_config(args, cfg), ds, cb, out_dir=out)
    logging.getLogger(__name__).info("final loss %.5f", result.final_loss)
    return EXIT_OK


def cmd_sample(args) -> int:
    from dar.sampler import sample_tokens

    cfg = _run_config(args)
    out = _require_out(args)
    params, header = _load_ckpt(args.checkpoint)
    sc = cfg.sample
    overrides = {
        "class_label": args.class_label,
        "batch": args.batch,
        "guidance_scale": args.guidance_scale,
        "scale_power": args.scale_power,
        "temperature": args.temperature,
    }
    sc = replace(sc, **{k: v for k, v in overrides.items() if v is not None})
    if args.argmax:
        sc = replace(sc, argmax=True)
    grids = sample_tokens(params, sc)
    cb = _codebook_from_params(params)
    files = []
    for i, g in enumerate(grids):
        name = f"sample_{i:03d}.ppm"
        write_ppm(out / name, render_pixels(cb.codes[g], args.render_scale))
        files.append(name)
    manifest = {
        "seed": sc.seed,
        "class": sc.class_label,
        "config": {"model": params.config.to_dict(), "sample": sc.to_dict(), "fingerprint": header["fingerprint"]},
        "grids": [g.tolist() for g in grids],
        "images": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    from dar.harness.metrics import evaluate

    cfg = _run_config(args)
    params, header = _load_ckpt(args.checkpoint)
    ds, cb = _load_data(args.data)
    report = evaluate(params, ds, cb, args.samples, cfg.sample, seed=cfg.sample.seed)
    payload = report.to_dict()
    payload["checkpoint_fingerprint"] = header["fingerprint"]
    payload["dataset_fingerprint"] = ds.fingerprint()
    _emit(payload, args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    from dar.harness.ablate import ablate

    cfg = _run_config(args)
    ds, cb = _load_data(args.data)
    report = ablate(_train_config(args, cfg), ds, cb, None, args.samples, cfg.sample, args.workers)
    _emit(report, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    from dar.model import init_model
    from dar.sampler import bench

    cfg = _run_config(args)
    if args.checkpoint is not None:
        params, _ = _load_ckpt(args.checkpoint)
    else:
        mc = cfg.model
        params = init_model(mc, make_codebook(mc.vocab_size, mc.code_dim, cfg.train.seed), seed=cfg.train.seed)
    result = bench(params, args.batch, repeats=args.repeats)
    _emit(result.to_dict(), args.out)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from dar.harness.checks import model_gradcheck
    from dar.presets import TINY_4D_MODEL, TINY_MODEL

    model = TINY_MODEL if args.preset == "tiny" else TINY_4D_MODEL
    errors = model_gradcheck(model, seed=args.seed or 0)
    worst = max(errors.values())
    ok = worst < args.tolerance
    _emit({"preset": args.preset, "max_relative_error": worst, "tolerance": args.tolerance, "passed": ok, "per_tensor": errors}, args.out)
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "scan": cmd_scan,
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
    "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:  # --help
            return int(e.code or 0)
        if args.command is None:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValidationError, CheckpointError, CodebookFormatError, DatasetFormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
