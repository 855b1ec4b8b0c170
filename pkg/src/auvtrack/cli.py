"""Command-line entry point.

    auvtrack {localize|track|search|grid} --config PATH --out DIR
             [--seed N] [--format csv|json]

Exit codes: 0 success, 2 usage error, 3 precondition violated, 10-14 solver
geometry/root failures, 20-22 filter model errors, 30-31 search errors,
40 empty input, 51 config parse error, 52 config validation error,
60 output I/O error, 1 any other failure.

``AUVTRACK_LOG`` sets the log level (e.g. ``INFO``, ``DEBUG``); it never
changes results.
"""

import argparse
import logging
import os
import sys

from . import kernels
from .config import bundled_config, from_dict, load_raw, resolve
from .errors import AuvTrackError, ValidationError
from .serialize import build_manifest, write_run_record
from .sim import (
    generate_grid,
    paper_grid,
    run_localization_experiment,
    run_search_experiment,
    run_tracking_experiment,
)

log = logging.getLogger("auvtrack")

EPILOG = __doc__.split("Exit codes:", 1)[1].split("``AUVTRACK_LOG``")[0]
EPILOG = "exit codes:" + EPILOG


def build_parser():
    parser = argparse.ArgumentParser(
        prog="auvtrack",
        description="TDOA localization, Kalman tracking and search-region simulation.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="{localize,track,search,grid}")
    sub.required = True
    for name, help_text in [
        ("localize", "closed-form fixes over the configured grid"),
        ("track", "filtered tracking along the configured trajectory"),
        ("search", "tracking, disconnection and search-region prediction"),
        ("grid", "print the configured grid points"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "grid",
                       help="scenario JSON or a manifest.json from a previous run "
                            "(bundled:NAME for shipped configs)")
        if name != "grid":
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
    return parser


def _config_path(arg):
    if arg.startswith("bundled:"):
        return bundled_config(arg.split(":", 1)[1])
    return arg


def _setup_logging():
    level = os.environ.get("AUVTRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _run(args):
    if args.subcommand == "grid" and args.config is None:
        points = paper_grid()
    else:
        raw = load_raw(_config_path(args.config))
        resolved, _ = resolve(raw)
        if args.seed is not None:
            resolved["seed"] = args.seed
        cfg = from_dict(resolved)
        if args.subcommand == "grid":
            if cfg.grid is None:
                raise ValidationError("grid", "config has no grid")
            points = generate_grid(cfg.grid.origin, cfg.grid.spacing, cfg.grid.counts,
                                   cfg.grid.z_descends)
    if args.subcommand == "grid":
        for p in points:
            print(",".join(repr(float(c)) for c in p))
        return 0

    if args.subcommand == "localize":
        if cfg.grid is None:
            raise ValidationError("grid", "localize needs a grid")
        record = run_localization_experiment(cfg)
    elif args.subcommand == "track":
        if cfg.trajectory is None:
            raise ValidationError("trajectory", "track needs a trajectory")
        record = run_tracking_experiment(cfg)
    else:
        if cfg.trajectory is None:
            raise ValidationError("trajectory", "search needs a trajectory")
        if cfg.disconnect_time is None:
            raise ValidationError("disconnect_time_s", "search needs a disconnect time")
        if cfg.scenario is None:
            raise ValidationError("scenario", "search needs a scenario")
        record = run_search_experiment(cfg)
    manifest = build_manifest(args.subcommand, resolved, args.format, kernels.backend())
    for path in write_run_record(record, args.out, args.format, manifest):
        log.info("wrote %s", path)
    return 0


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return _run(args)
    except AuvTrackError as exc:
        print(f"auvtrack: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"auvtrack: error: {exc}", file=sys.stderr)
        return 51


if __name__ == "__main__":
    sys.exit(main())
