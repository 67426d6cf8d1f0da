"""Command-line entry point wiring all modules together.

Commands: synth, train, eval, recognize, bench, dump-attn. Outputs are
files and terminal text; every command is deterministic given its config
and seed (bench wall-times excepted). Exit codes: 0 success, 1 runtime
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigKeyError, RunConfig, build_config, format_config, load_config_file
from .model import Recognizer
from .pgm import read_pgm
from .pipeline import BeamConfig, export_attention, recognize
from .synth import generate_dataset, load_dataset
from .trainer import Trainer, evaluate


def _collect_pairs(args) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    if getattr(args, "config", None):
        pairs.extend(load_config_file(args.config))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigKeyError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        pairs.append((key.strip(), value.strip()))
    return pairs


def _echo_config(cfg: RunConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.effective.cfg"), "w", encoding="utf-8") as f:
        f.write(format_config(cfg))


def cmd_synth(args) -> int:
    pairs = _collect_pairs(args)
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    if args.mode is not None:
        pairs.append(("synth.mode", args.mode))
    cfg = build_config(pairs)
    manifest = generate_dataset(args.n, cfg.synth, args.out)
    _echo_config(cfg, args.out)
    print(f"wrote {len(manifest)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    pairs = _collect_pairs(args)
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    if args.direction is not None:
        pairs.append(("train.direction", args.direction))
    if args.steps is not None:
        pairs.append(("train.max_steps", str(args.steps)))
    if args.batch_size is not None:
        pairs.append(("train.batch_size", str(args.batch_size)))
    cfg = build_config(pairs)

    dataset = load_dataset(args.data)
    if args.resume:
        trainer = load_checkpoint(args.resume)
    else:
        model = Recognizer(cfg.encoder, cfg.decoder, cfg.train.direction, seed=cfg.seed)
        trainer = Trainer(model, cfg.train)
    os.makedirs(args.out, exist_ok=True)
    _echo_config(cfg, args.out)
    metrics_path = os.path.join(args.out, "metrics.jsonl")
    log = trainer.train(dataset, metrics_path=metrics_path)
    ckpt_path = os.path.join(args.out, "model.hatr")
    save_checkpoint(ckpt_path, trainer)
    last = log[-1] if log else {}
    print(
        f"trained {trainer.step} steps; checkpoint {ckpt_path}"
        + (f"; train accuracy {last.get('accuracy', float('nan')):.3f}" if last else "")
    )
    return 0


def cmd_eval(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    trainer = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    metrics = evaluate(dataset, trainer.model, BeamConfig(k=args.k))
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_recognize(args) -> int:
    if not os.path.exists(args.checkpoint):
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    trainer = load_checkpoint(args.checkpoint)
    image = read_pgm(args.image)
    result = recognize(image, trainer.model, BeamConfig(k=args.k))
    if args.verbose:
        print(
            f"candidates={result.n_candidates} picked={result.candidate_index} "
            f"direction={result.direction}",
            file=sys.stderr,
        )
    if args.dump_attn:
        cfg = trainer.model.encoder_config
        stem = os.path.join(
            args.dump_attn, os.path.splitext(os.path.basename(args.image))[0]
        )
        paths = export_attention(
            result.records,
            image.shape,
            (cfg.grid_height, cfg.grid_width),
            stem,
        )
        if args.verbose:
            print(f"wrote {len(paths)} heatmaps under {args.dump_attn}", file=sys.stderr)
    print(f"{result.text}\t{result.score:.6f}")
    return 0


def cmd_bench(args) -> int:
    lengths = tuple(int(p) for p in args.lengths.split(","))
    batches = tuple(int(p) for p in args.batches.split(","))
    if args.repeats < bench_mod.MIN_REPEATS:
        print(
            f"warning: --repeats {args.repeats} is below the minimum of "
            f"{bench_mod.MIN_REPEATS}; results are indicative only",
            file=sys.stderr,
        )
    rows = bench_mod.run_bench(
        lengths=lengths, batch_sizes=batches, repeats=args.repeats, seed=args.seed
    )
    bench_mod.write_csv(rows, args.out)
    for phase in ("forward", "backward"):
        ratios = bench_mod.speedups(rows, phase)
        for (batch, t_len), ratio in sorted(ratios.items()):
            print(f"{phase} speedup batch={batch} T={t_len}: {ratio:.2f}x")
    print(f"report written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hatr", description="holistic-attention text recognizer"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)"
    )

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("none", "rotate", "perspective", "arc", "mixed"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a recognizer")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--direction", choices=("normal", "reversed", "bidirectional"))
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=5, help="beam width")
    p.set_defaults(func=cmd_eval)

    for name in ("recognize", "dump-attn"):
        p = sub.add_parser(
            name,
            parents=[common],
            help="recognize one image" if name == "recognize" else "recognize and export attention maps",
        )
        p.add_argument("--checkpoint", required=True)
        p.add_argument("image", help="PGM image path")
        p.add_argument("--k", type=int, default=5)
        p.add_argument("--verbose", action="store_true")
        if name == "recognize":
            p.add_argument("--dump-attn", metavar="DIR")
        else:
            p.add_argument("--out", dest="dump_attn", required=True, metavar="DIR")
        p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("bench", parents=[common], help="decoder speed benchmark")
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--repeats", type=int, default=bench_mod.MIN_REPEATS)
    p.add_argument("--lengths", default="5,10,20,40")
    p.add_argument("--batches", default="20")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigKeyError,) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures exit 1, usage errors exit 2
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
