"""Command line entry points: ``train`` and ``export``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .data import DataError
from .export import export_scores
from .train import ARCHITECTURES, EXTRA_ARCHITECTURES, TrainerError, TrainSpec, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="descimg-trainer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fine-tune a classifier on the train split")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--run-dir", type=Path, required=True)
    p.add_argument("--architecture", default="densenet169",
                   choices=ARCHITECTURES + EXTRA_ARCHITECTURES)
    p.add_argument("--input-size", type=int, default=224)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--snapshot-every", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--no-pretrained", action="store_true",
                   help="random initialization instead of ImageNet weights")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export", help="export per-image score documents from a snapshot")
    p.add_argument("--snapshot", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--split", default="test")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            spec = TrainSpec(
                architecture=args.architecture,
                manifest=args.manifest,
                images_root=args.images,
                run_dir=args.run_dir,
                input_size=args.input_size,
                learning_rate=args.learning_rate,
                epochs=args.epochs,
                snapshot_every=args.snapshot_every,
                batch_size=args.batch_size,
                pretrained=not args.no_pretrained,
                seed=args.seed,
            )
            run_dir = train(spec)
            print(f"run directory: {run_dir}")
        else:
            summary = export_scores(
                args.snapshot, args.manifest, args.images, args.out, args.split
            )
            print(
                f"exported {summary.sites_exported} sites, "
                f"{summary.rows_written} rows, "
                f"{len(summary.skipped_images)} images skipped"
            )
    except (TrainerError, DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
