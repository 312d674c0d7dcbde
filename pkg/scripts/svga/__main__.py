"""
SVGA detector CLI.

Usage:
    python -m scripts.svga train [--config FILE] [--class car|pedcyc] [--dataset DIR] [--split FILE] [--seed N] [--out DIR]
    python -m scripts.svga eval  --checkpoint FILE [--config FILE] [--dataset DIR] [--split FILE] [--out DIR]
    python -m scripts.svga infer --checkpoint FILE [--config FILE] [--dataset DIR] [--split FILE] [--out DIR]
    python -m scripts.svga bench [--config FILE] [--checkpoint FILE] [--out DIR] [--profile FILE]

Examples:
    # Laptop-sized synthetic run
    python -m scripts.svga train --config config/desk.cfg --out output/desk

    # Evaluate the resulting checkpoint on the same scenes
    python -m scripts.svga eval --config config/desk.cfg --checkpoint output/desk/model.ckpt --out output/desk/eval
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from scripts.svga import resolve_config, run_bench, run_eval, run_infer, run_train
from src.core.config import CLASS_GROUPS, TrainConfig
from src.core.console_utils import setup_logging
from src.core.errors import SvgaError
from src.core.profiler import profile_script

COMMANDS = ["train", "eval", "infer", "bench"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svga",
        description="Sparse voxel-graph attention 3D detector: train, evaluate, detect, benchmark",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s train --config config/desk.cfg --out output/desk
  %(prog)s eval --config config/desk.cfg --checkpoint output/desk/model.ckpt
  %(prog)s infer --class car --dataset data/kitti --split data/kitti/val.txt --checkpoint car.ckpt
        """,
    )
    parser.add_argument("command", choices=COMMANDS, help="Command to execute")
    parser.add_argument("--config", type=Path, default=None, help="Configuration file (key = value text or JSON)")
    parser.add_argument("--checkpoint", type=Path, default=None, help="Model checkpoint for eval/infer/bench")
    parser.add_argument("--dataset", type=Path, default=None, help="KITTI-layout dataset directory")
    parser.add_argument("--split", type=Path, default=None, help="Split file listing scene ids")
    parser.add_argument(
        "--class",
        dest="class_group",
        choices=sorted(CLASS_GROUPS),
        default=None,
        help="Class preset (not allowed together with --config)",
    )
    parser.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    parser.add_argument("--out", type=Path, default=Path("output/svga"), help="Output directory")
    parser.add_argument("--profile", type=Path, default=None, help="Write cProfile statistics of the command to FILE")
    parser.add_argument("--verbose", action="store_true", help="Debug-level logging")
    return parser


def _dispatch(args: argparse.Namespace, config: TrainConfig) -> None:
    if args.command == "train":
        run_train(config, args.out)
    elif args.command == "eval":
        run_eval(config, args.checkpoint, args.out)
    elif args.command == "infer":
        run_infer(config, args.checkpoint, args.out)
    else:
        run_bench(config, args.checkpoint, out_dir=args.out)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main CLI entry point.

    Returns:
        Exit code (0 for success, 1 for error)
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.out / "logs", logging.DEBUG if args.verbose else logging.INFO)

    try:
        config = resolve_config(args.config, args.class_group, args.seed, args.dataset, args.split)
        if args.profile is not None:
            profile_script(lambda: _dispatch(args, config), output_file=str(args.profile))
        else:
            _dispatch(args, config)
    except (SvgaError, FileNotFoundError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
