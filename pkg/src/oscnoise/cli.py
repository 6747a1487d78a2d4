"""Command-line front end.

    oscnoise run CONFIG [--mc] [--nodes a,b] [--out DIR] [--plot]

Log verbosity is controlled by the OSCNOISE_LOG environment variable
(debug | info | warning; default warning).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import parse_config
from .errors import OscNoiseError
from .pipeline import run_pipeline


def _setup_logging():
    level = os.environ.get("OSCNOISE_LOG", "warning").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="oscnoise",
        description="Phase/amplitude/cross noise spectra of autonomous oscillators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a full analysis from a config file")
    run.add_argument("config", type=Path, help="INI-style run configuration")
    run.add_argument("--mc", action="store_true", default=None,
                     help="enable the Monte-Carlo overlay regardless of the config")
    run.add_argument("--nodes", type=str, default=None,
                     help="comma-separated observation-node override")
    run.add_argument("--out", type=Path, default=None, help="output directory override")
    run.add_argument("--plot", action="store_true", help="emit plot script and SVG figure")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    if args.command != "run":  # pragma: no cover - argparse enforces this
        return 2
    try:
        config = parse_config(args.config)
        nodes = None
        if args.nodes:
            nodes = tuple(s.strip() for s in args.nodes.split(",") if s.strip())
        _, summary = run_pipeline(
            config, mc=args.mc, nodes=nodes, out_dir=args.out, plot=args.plot
        )
    except OscNoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary.pretty())
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
