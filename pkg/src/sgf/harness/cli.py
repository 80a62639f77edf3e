"""Command-line entry point: ``sgf <mode> [--config FILE] [--set k=v]... [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..config import ConfigError, ExperimentConfig
from ..rl.checkpoint import CheckpointError
from ..rl.ppo import NumericalError
from .runner import MODES, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("sgf")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgf", description=__doc__.splitlines()[0])
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="base output directory")
    parser.add_argument("--episodes", type=int, help="shorthand for --set episodes=N")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = list(args.overrides)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    if args.episodes is not None:
        overrides.append(f"episodes={args.episodes}")
    return cfg.with_overrides(overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        result = run(args.mode, cfg)
    except (ConfigError, CheckpointError, OSError) as exc:
        print(f"sgf: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"sgf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    log.info("artifacts in %s", result.directory)
    print(json.dumps({"mode": result.mode, "directory": str(result.directory),
                      "summary": result.summary}, indent=2, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
