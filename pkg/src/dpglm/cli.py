"""Command-line front end: ``dpglm gen|run|report``."""

from __future__ import annotations

import argparse
import sys

from .harness import cmd_gen, cmd_report, cmd_run, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpglm",
        description="Private GLM training experiments: generate instances, run sweeps, summarize.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a dataset CSV + metadata from a config")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run the configured sweep and emit a results CSV")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--seed", type=int, default=None, help="override the base seed")

    report = sub.add_parser("report", help="summarize a results CSV")
    report.add_argument("--config", default=None, help="unused; accepted for symmetry")
    report.add_argument("csv", help="results CSV path")
    report.add_argument("--out", default=None, help="optional summary CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            path = cmd_gen(args.config, args.out)
            print(f"wrote {path} and {path}.meta.json")
        elif args.command == "run":
            text = cmd_run(args.config, out_path=args.out, threads=args.threads, base_seed=args.seed)
            target = args.out or load_config(args.config).out
            if target is None:
                sys.stdout.write(text)
            else:
                print(f"wrote {target}")
        elif args.command == "report":
            sys.stdout.write(cmd_report(args.csv, out_path=args.out))
    except Exception as exc:  # surfaced as exit code per the CLI contract
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
