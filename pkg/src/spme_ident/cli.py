"""``spme-ident`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from . import runner

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spme-ident",
                                     description="SPMe parameter identifiability experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment file (omit for all defaults)")
    common.add_argument("--only-point", type=int, metavar="N",
                        help="restrict to local SoC point N (1-11)")
    common.add_argument("--workers", type=int, metavar="K", help="parallel jobs")
    common.add_argument("--seed", type=int, metavar="S", help="master seed override")
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("generate", parents=[common], help="simulate synthetic datasets")
    fit = sub.add_parser("fit", parents=[common], help="run MCMC and/or MLE on datasets")
    fit.add_argument("--method", choices=("mcmc", "mle", "both"))
    summ = sub.add_parser("summarize", parents=[common], help="write tables and histograms")
    summ.add_argument("--bins", type=int, help="histogram bin count")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    updates = {}
    if args.only_point is not None:
        if cfg.kind == "wide":
            raise ConfigError("--only-point selects a local point but the experiment kind is 'wide'")
        updates.update(points=(args.only_point,), kind="local")
    if args.workers is not None:
        updates["workers"] = args.workers
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "method", None):
        updates["method"] = args.method
    if getattr(args, "bins", None) is not None:
        updates["bins"] = args.bins
    return replace(cfg, **updates).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
    except ConfigError as err:
        print(f"spme-ident: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "generate":
            manifest = runner.cmd_generate(cfg)
            print(json.dumps(manifest, indent=2, sort_keys=True))
        elif args.command == "fit":
            for path in runner.cmd_fit(cfg, cfg.method):
                print(path)
        else:
            print(runner.cmd_summarize(cfg).read_text(), end="")
    except (OSError, RuntimeError, ValueError, ArithmeticError) as err:
        print(f"spme-ident: error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
