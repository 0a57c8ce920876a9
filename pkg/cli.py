"""
Command-line front end: preprocess, train, generate, evaluate, ablate, depth-sweep.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from config import ASSIGNMENT_MODES, LOSS_MODES, RunConfig, load_run_config, logger
from errors import ConfigError
from pipeline import DEPTH_GRID, cmd_ablate, cmd_depth_sweep, cmd_evaluate, cmd_generate, cmd_preprocess, cmd_train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_run_flags(parser):
    parser.add_argument("--config", help="key = value run configuration file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--he", dest="he", action="store_true", default=None, help="enable histogram equalisation")
    parser.add_argument("--no-he", dest="he", action="store_false", help="disable histogram equalisation")
    parser.add_argument("--assignment", choices=ASSIGNMENT_MODES)
    parser.add_argument("--loss", choices=LOSS_MODES)


def build_parser():
    parser = _Parser(prog="qigl", description="Quantum-classical generative toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="equalise and copy a folder of grayscale images")
    p.add_argument("input_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--he", dest="he", action="store_true", default=True)
    p.add_argument("--no-he", dest="he", action="store_false")
    p.add_argument("--exclude", help="file listing filenames to skip")

    p = sub.add_parser("train", help="train a generator and write checkpoints")
    _add_run_flags(p)
    p.add_argument("--resume", action="store_true", help="continue from the newest checkpoint")

    p = sub.add_parser("generate", help="sample images from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("-n", type=int, default=16)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("pgm", "png"), default="pgm")

    p = sub.add_parser("evaluate", help="Fréchet distance of a checkpoint against real images")
    p.add_argument("checkpoint")
    p.add_argument("datasets", nargs="*", help="dataset directories (default: the training dataset)")
    p.add_argument("-n", type=int, default=256)
    p.add_argument("--space", choices=("features", "pixels"), default="features")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report path")

    p = sub.add_parser("ablate", help="run the assignment x loss x HE grid")
    _add_run_flags(p)

    p = sub.add_parser("depth-sweep", help="train one quantum run per circuit depth plus the classical baseline")
    _add_run_flags(p)
    p.add_argument("--depths", type=int, nargs="+", default=list(DEPTH_GRID), help="circuit depths to train")
    return parser


def resolve_run_config(args):
    """RunConfig from --config (or defaults) with command-line overrides applied."""
    run = load_run_config(args.config) if args.config else RunConfig()
    return run.with_overrides(
        seed=args.seed,
        out_dir=args.out,
        he_enabled=args.he,
        assignment_mode=args.assignment,
        loss_mode=args.loss,
    )


def _dispatch(args):
    if args.command == "preprocess":
        manifest = cmd_preprocess(args.input_dir, args.out, he=args.he, exclude=args.exclude)
        print(f"{len(manifest['files'])} images written to {args.out}")
    elif args.command == "train":
        summary = cmd_train(resolve_run_config(args), resume=args.resume)
        print(
            f"epoch {summary.epoch}: Fréchet {summary.initial_frechet:.6f} -> {summary.final_frechet:.6f} "
            f"({summary.out_dir})"
        )
    elif args.command == "generate":
        paths = cmd_generate(args.checkpoint, args.n, args.out, seed=args.seed, fmt=args.format)
        print(f"{len(paths)} images written to {args.out}")
    elif args.command == "evaluate":
        report = cmd_evaluate(args.checkpoint, args.datasets, args.n, args.space, args.seed, args.out)
        print(report.to_json())
    elif args.command == "ablate":
        rows = cmd_ablate(resolve_run_config(args))
        print(json.dumps(rows, indent=2))
    elif args.command == "depth-sweep":
        rows = cmd_depth_sweep(resolve_run_config(args), tuple(args.depths))
        print(json.dumps(rows, indent=2))


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _dispatch(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
