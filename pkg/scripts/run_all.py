"""Run every shipped config in configs/ through the CLI.

    python scripts/run_all.py [--out runs] [--only bistable lj_cool]
"""

import argparse
import sys
import time
from pathlib import Path

from twotemp import cli
from twotemp.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "runs"))
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    args = ap.parse_args()
    failed = []
    for path in sorted((ROOT / "configs").glob("*.json")):
        if args.only and path.stem not in args.only:
            continue
        experiment = load_config(path).experiment
        t0 = time.perf_counter()
        rc = cli.main([experiment, "--config", str(path), "--out", str(Path(args.out) / path.stem)])
        print(f"{path.stem}: exit {rc} in {time.perf_counter() - t0:.1f} s", flush=True)
        if rc:
            failed.append(path.stem)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
