"""Command-line entry point.

Subcommands map onto the pipeline stages; `all` chains them. Exit codes:
0 success, 1 configuration problem, 2 numerical failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path as FsPath

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    NumericalError,
    ShapeError,
)
from .fileio import read_config
from .harness import (
    parse_experiment_config,
    run_all,
    run_calibration,
    run_evaluation,
    run_generate,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathattr",
        description="Path-integral feature attributions with optimized Riemann sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "generate": "write the synthetic dataset (and model weights) to disk",
        "calibrate": "estimate derivative profiles and write optimized schedules",
        "evaluate": "score uniform vs optimized schedules into results.csv",
        "plot": "render SVG plots from an existing output directory",
        "all": "run generate, calibrate, evaluate, and plot in sequence",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="experiment config file (key = value lines)")
        p.add_argument("--out", help="output directory (default: output.dir from config)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--verbose", action="store_true", help="progress messages on stderr")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            out_dir = FsPath(args.out) if args.out else FsPath("out")
            from .plots import emit_plots

            emit_plots(out_dir, verbose=args.verbose)
            return 0
        if not args.config:
            raise ConfigError(f"{args.command} requires --config")
        config = parse_experiment_config(read_config(args.config),
                                         seed_override=args.seed)
        out_dir = FsPath(args.out) if args.out else FsPath(config.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        runner = {
            "generate": run_generate,
            "calibrate": run_calibration,
            "evaluate": run_evaluation,
            "all": run_all,
        }[args.command]
        runner(config, out_dir, verbose=args.verbose)
        return 0
    except ConfigError as exc:
        print(f"pathattr: config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, DomainError, ShapeError, DegenerateInputError) as exc:
        print(f"pathattr: numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pathattr: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
