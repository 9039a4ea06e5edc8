"""Command-line entry point: ``lingamkit <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from .errors import ConfigError, LingamKitError
from .pipeline import PipelineConfig, cmd_check, cmd_preprocess, cmd_run, cmd_select, load_config

COMMANDS = {
    "preprocess": cmd_preprocess,
    "select-features": cmd_select,
    "check-assumptions": cmd_check,
    "run": cmd_run,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", help="master seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--algorithm", choices=["direct-lingam", "rcd", "direct_lingam"])
    common.add_argument(
        "--ordinal", action="append", default=[], metavar="COL=L1,L2,...",
        help="ordered levels for an ordinal column (repeatable)",
    )
    skip = {"seed", "out", "algorithm", "ordinal"}
    for f in fields(PipelineConfig):
        if f.name not in skip:
            common.add_argument("--" + f.name.replace("_", "-"), dest=f.name, metavar="VALUE")
    parser = _Parser(prog="lingamkit", description="Causal discovery and effect estimation pipeline.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or "").splitlines()[0])
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {f.name: getattr(args, f.name, None) for f in fields(PipelineConfig) if f.name != "ordinal"}
    for spec in args.ordinal:
        col, sep, levels = spec.partition("=")
        if not sep or not col:
            raise ConfigError(f"--ordinal expects COL=L1,L2,..., got {spec!r}")
        overrides[f"ordinal.{col}"] = levels
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        COMMANDS[args.command](cfg)
    except LingamKitError as exc:
        print(f"lingamkit {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
