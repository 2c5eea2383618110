"""Command line entry point: ``nlslab <experiment> --config c.json --out dir``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import KINDS, ExperimentConfig, execute, load_summary, report


def _config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    kind = data.get("kind", args.command)
    if kind != args.command:
        raise ValueError(f"config is for {kind!r}, not {args.command!r}")
    data["kind"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = args.out
    return ExperimentConfig.from_dict(data)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlslab", description="Random-data NLS experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", help="JSON file with ExperimentConfig fields")
        p.add_argument("--out", help="output directory (default: config 'out' or ./runs/<kind>)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p = sub.add_parser("report", help="print the report of a finished run")
    p.add_argument("dir", help="output directory of a previous run")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        try:
            rec = load_summary(args.dir)
        except FileNotFoundError as exc:
            print(f"nlslab: no finished run in {args.dir} ({exc.filename} missing)", file=sys.stderr)
            return 2
        sys.stdout.write(report(rec))
        return 0
    try:
        cfg = _config(args)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"nlslab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out or Path("runs") / cfg.kind)
    cfg = replace(cfg, out=str(out))
    rec = execute(cfg, out, workers=args.threads)
    sys.stdout.write(report(rec))
    return 0 if rec.passed else 1


if __name__ == "__main__":
    sys.exit(main())
