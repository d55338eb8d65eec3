"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  Every command is a deterministic function of its input files, the
configuration, and the seed.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import __version__
from .pipeline import (ConfigError, DataError, NumericalError, cmd_backtest,
                       cmd_fit, cmd_full_study, cmd_mc_study, cmd_rv,
                       cmd_simulate, load_config)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", default=None,
                   help="experiment config file (key = value sections)")
    p.add_argument("--seed", type=int, default=None, metavar="U64",
                   help="override the config seed")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="output directory (default from config)")
    p.add_argument("--paper-scale", action="store_true",
                   help="full published-study scale (500 replications, all m)")
    p.add_argument("--jobs", type=int, default=None, metavar="N",
                   help="worker threads for the simulation kernels")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ergi",
        description="Exponential realized GARCH-Ito volatility toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate noisy ticks and true IV")
    _add_common(p)

    p = sub.add_parser("rv", help="pre-averaging realized volatility from ticks")
    p.add_argument("ticks", help="tick CSV (day,timestamp,log_price)")
    p.add_argument("--multiplier", type=float, default=None,
                   help="truncation multiplier (default from config)")
    _add_common(p)

    p = sub.add_parser("fit", help="QMLE fit of the log-IV recursion")
    p.add_argument("rv", help="realized-volatility CSV")
    p.add_argument("--warm-start", metavar="MODEL", default=None,
                   help="model file providing the starting point")
    _add_common(p)

    p = sub.add_parser("mc-study", help="Monte-Carlo study over (n, m) cells")
    _add_common(p)

    p = sub.add_parser("backtest", help="rolling one-step forecast backtest")
    p.add_argument("rv", help="realized-volatility CSV")
    p.add_argument("returns", nargs="?", default=None,
                   help="daily open-to-close returns CSV (for UGARCH)")
    _add_common(p)

    p = sub.add_parser("full-study",
                       help="simulate, estimate, and backtest end to end")
    _add_common(p)
    return ap


def _effective_config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not (0 <= args.seed < 2**64):
            raise ConfigError("seed must fit in 64 bits")
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "multiplier", None) is not None:
        if args.multiplier <= 0:
            raise ConfigError("truncation multiplier must be > 0")
        cfg = replace(cfg, c_tau_multiplier=args.multiplier)
    if args.paper_scale:
        cfg = cfg.paper_scale()
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        import numba
        numba.set_num_threads(args.jobs)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.command == "simulate":
            paths = cmd_simulate(cfg, args.out)
        elif args.command == "rv":
            paths = cmd_rv(args.ticks, cfg, args.out)
        elif args.command == "fit":
            paths = cmd_fit(args.rv, cfg, args.out, warm_start=args.warm_start)
        elif args.command == "mc-study":
            paths = cmd_mc_study(cfg, args.out)
        elif args.command == "backtest":
            paths = cmd_backtest(args.rv, args.returns, cfg, args.out)
        elif args.command == "full-study":
            paths = cmd_full_study(cfg, args.out)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for key, value in paths.items():
        print(f"{key}: {value}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
