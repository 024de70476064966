"""Command-line runner: ``flagpara <experiment> --config c.json --out r.csv``.

Exit codes: 0 success, 1 configuration or input error, 2 internal
consistency failure.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConsistencyError, FlagparaError, InputError
from .experiments import EXPERIMENTS, ExperimentConfig, load_config, run_experiment


class _Parser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting with argparse's status 2."""

    def error(self, message):
        raise InputError(f"{message}\n{self.format_usage().rstrip()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flagpara", description="Batch multiplier and flag-paraproduct experiments.")
    p.add_argument("--version", action="version", version=f"flagpara {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{" + ",".join(EXPERIMENTS) + "}", parser_class=_Parser)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config (required except for self-test)")
        s.add_argument("--out", help="CSV output path (default: stdout)")
        s.add_argument("--summary", help="JSON summary output path")
        s.add_argument("--seed", type=int, help="override the config seed")
        s.add_argument("--trials", type=int, help="override the config trial count")
        s.add_argument("--quiet", action="store_true", help="suppress the stderr summary line")
    return p


def _config(args) -> ExperimentConfig:
    if args.config is None:
        if args.command != "self-test":
            raise InputError(f"{args.command} needs --config PATH")
        return ExperimentConfig.from_dict({"experiment": "self-test"}, args.seed, args.trials)
    cfg = load_config(args.config, args.seed, args.trials)
    if cfg.experiment != args.command:
        raise InputError(f"config {args.config} is for {cfg.experiment!r}, not {args.command!r}")
    return cfg


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from None


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise InputError("missing subcommand\n" + build_parser().format_usage().rstrip())
        cfg = _config(args)
        report = run_experiment(cfg)
        out = args.out or cfg.output
        csv_text = report.to_csv()
        if out:
            _write(out, csv_text)
        else:
            sys.stdout.write(csv_text)
        if args.summary:
            _write(args.summary, json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
        if not args.quiet:
            key = f"max_{report.value_column}"
            s = report.summary()
            tail = f" {key}={s[key]:.6g}" if key in s else ""
            print(f"{args.command}: {s['rows']} rows{tail}", file=sys.stderr)
        return 0
    except ConsistencyError as exc:
        print(f"error: consistency failure: {exc}", file=sys.stderr)
        return 2
    except (FlagparaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
