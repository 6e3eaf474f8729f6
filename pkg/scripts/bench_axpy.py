#!/usr/bin/env python3
"""axpy throughput sweep over vector sizes and backends (CSV on stdout).

    python scripts/bench_axpy.py --workers 4 > axpy.csv
"""

import argparse
import logging
import sys

from hwnum.backends import use_config
from hwnum.cli import bench_axpy


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[2**k for k in range(10, 24, 2)])
    ap.add_argument("--backends", nargs="+", default=["generic", "blocked", "parallel"])
    ap.add_argument("--precision", default="single")
    ap.add_argument("--reps", type=int, default=7)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")

    with use_config(worker_count=args.workers):
        report = bench_axpy(args.sizes, args.backends, args.precision, args.reps)
    sys.stdout.write(report.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
