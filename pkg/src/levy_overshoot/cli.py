"""Command line entry point: ``levy-overshoot <experiment> --config PATH``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import EXIT_INVALID, run_experiment, write_bundle
from .levy_model import InvalidTripletError
from .oracle import OracleError
from .pathsim import EngineError


class _Parser(argparse.ArgumentParser):
    # usage errors share the validation exit code; 2 is reserved for theorem violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="levy-overshoot", description=__doc__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--seed", type=int, default=None, help="overrides sim.seed")
        p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = None
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.out, fmt=args.format,
                          experiment=args.experiment)
        if args.workers is not None:
            cfg.sim = replace(cfg.sim, workers=args.workers)
        bundle = run_experiment(cfg)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (InvalidTripletError, EngineError, OracleError, ValueError) as e:
        fragment = cfg.raw.get("triplet") if cfg is not None else None
        print(f"error: {e}\n  triplet: {fragment!r}", file=sys.stderr)
        return EXIT_INVALID
    write_bundle(bundle, cfg.output, cfg.format)
    for line in bundle.summary:
        print(line)
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())
