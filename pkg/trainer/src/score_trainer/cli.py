"""Command line for the two training stages."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .train import TrainConfig, train_cutnet, train_unet


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="score-trainer",
        description="Train the system-segmentation networks on a synthetic corpus.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--corpus", required=True, type=Path)
        p.add_argument("--out", required=True, type=Path,
                       help="output VSW1 weight file")
        p.add_argument("--log", type=Path, default=None,
                       help="metric log JSON")
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--batch-size", type=int, default=4)
        p.add_argument("--learning-rate", type=float, default=1e-3)
        p.add_argument("--validation-fraction", type=float, default=0.1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--height", type=int, default=512)
        p.add_argument("--width", type=int, default=384)
        p.add_argument("--limit-pages", type=int, default=None)

    p = sub.add_parser("train-unet", help="train the U-Net against masks")
    common(p)
    p.set_defaults(func=cmd_train_unet)

    p = sub.add_parser("train-cutnet",
                       help="train the refinement net with a frozen U-Net")
    common(p)
    p.add_argument("--unet-weights", required=True, type=Path)
    p.set_defaults(func=cmd_train_cutnet)
    return parser


def _config(args) -> TrainConfig:
    return TrainConfig(
        corpus=str(args.corpus), epochs=args.epochs,
        batch_size=args.batch_size, learning_rate=args.learning_rate,
        validation_fraction=args.validation_fraction, seed=args.seed,
        input_height=args.height, input_width=args.width,
        limit_pages=args.limit_pages)


def cmd_train_unet(args) -> int:
    log = train_unet(_config(args), args.out, args.log)
    print(f"final val: {log['final_val']}")
    return 0


def cmd_train_cutnet(args) -> int:
    log = train_cutnet(_config(args), args.unet_weights, args.out, args.log)
    print(f"final val: {log['final_val']}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
