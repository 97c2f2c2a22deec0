"""Print compact text summaries of an output directory written by run_all.py.

    python scripts/summarize.py runs
"""

import sys
from pathlib import Path

import numpy as np

from twotemp.io import read_csv


def main(root):
    root = Path(root)
    for name in ["ou_kl/rates.csv", "ratio/ratio_summary.csv", "aep/aep.csv", "limits_sim/limits.csv",
                 "limits_sim/limits_fit.csv", "limits_target/limits.csv", "bistable/transitions.csv", "lj_cool/lj_summary.csv"]:
        path = root / name
        if not path.exists():
            continue
        comment, header, data = read_csv(path)
        print(f"== {name}  ({comment})")
        print("  " + "  ".join(f"{h:>14}" for h in header))
        rows = data if len(data) <= 12 else np.vstack([data[:6], data[-6:]])
        for row in rows:
            print("  " + "  ".join(f"{v:>14.6g}" for v in row))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "runs")
