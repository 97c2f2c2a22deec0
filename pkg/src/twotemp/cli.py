"""Command line entry point: ``twotemp <experiment> --config FILE [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .config import PARAMS, load_config
from .errors import ConfigError, NumericalError, ValidationError
from .experiments import run

log = logging.getLogger("twotemp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="twotemp", description="Two-temperature Langevin experiments.")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in PARAMS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--out", default=None, help="output directory (overrides the config)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def _setup_logging(verbose):
    # plain messages either way; NO_COLOR is honoured trivially since nothing is coloured
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    if os.environ.get("NO_COLOR"):
        logging.getLogger().handlers[0].setFormatter(logging.Formatter("%(message)s"))


def _report(summary):
    for key, value in summary.items():
        if isinstance(value, (float, int, np.floating, np.integer)):
            print(f"{key} = {value:.10g}")


def main(argv=None):
    args = _parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"experiment: config is for {cfg.experiment!r}, subcommand is {args.experiment!r}")
        log.info("running %s, seed %d, output in %s", cfg.experiment, cfg.seed, cfg.out)
        summary = run(cfg)
    except (ConfigError, ValidationError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERICAL
    _report(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
