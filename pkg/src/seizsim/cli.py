"""Command-line entry point: ``seiznet <stage> --config run.yaml``.

Exit status: 0 on success, 2 for configuration problems, 3 when a stage's
inputs are missing (run the named earlier stage), 1 for any other failure.
Set ``SEIZNET_LOG`` to a logging level name (``INFO``, ``DEBUG``) for progress
output on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ConfigurationError, DependencyError, ScenarioError, SeizSimError
from .pipeline import COMMANDS, STAGES, load_config

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seiznet", description="Closed-loop seizure prediction pipeline.")
    parser.add_argument("stage", choices=STAGES + ("all",), help="pipeline stage to run")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=_seed, help="override the global seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--patients", help="comma-separated patient ids")
    parser.add_argument("--fusion", choices=("and", "or", "ecg", "ieeg"), help="modality fusion rule")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("SEIZNET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    patients = [p for p in args.patients.split(",") if p] if args.patients else None
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, patients=patients, fusion=args.fusion)
        stages = STAGES if args.stage == "all" else (args.stage,)
        for stage in stages:
            for path in COMMANDS[stage](cfg):
                print(path)
    except DependencyError as exc:
        print(f"seiznet: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (ConfigurationError, ScenarioError) as exc:
        print(f"seiznet: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SeizSimError, OSError, RuntimeError, ValueError) as exc:
        print(f"seiznet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
