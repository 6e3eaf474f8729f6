#!/usr/bin/env python3
"""L2 error table for double, mixed and single precision multigrid.

Writes one CSV row per (precision, level) and prints the tables side by side.

    python scripts/accuracy_study.py --max-level 9 --out accuracy.csv
"""

import argparse
import csv
import sys

from hwnum.cli import format_table, poisson_table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-level", type=int, default=9)
    ap.add_argument("--tol", type=float, default=1e-10, help="tolerance for double and mixed")
    ap.add_argument("--out", help="CSV path (default: stdout only)")
    args = ap.parse_args(argv)

    rows = []
    for mode in ("double", "mixed", "single"):
        tol = None if mode == "single" else args.tol
        table = poisson_table(args.max_level, mode, tol)
        print(format_table(table, mode), end="\n\n")
        rows += [(mode, r.level, r.error, r.reduction, r.report.iterations, r.report.status or "converged")
                 for r in table]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["precision", "level", "l2_error", "reduction", "iterations", "status"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
