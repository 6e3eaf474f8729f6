"""Command-line clients: ``bench``, ``poisson`` and ``swe``.

Examples::

    hwnum bench --sizes 1000 100000 1000000 --backend generic parallel
    hwnum poisson --level 8 --precision mixed
    hwnum swe --scenario circular --grid 100 --steps 500 --precision prediction --out run/
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem, linalg, solvers, swe
from .backends import BackendTag, get_config, load_config, set_config, use_config
from .containers import DenseVector, as_precision

log = logging.getLogger("hwnum")


# -- benchmark ---------------------------------------------------------------------

@dataclass
class BenchRow:
    kernel: str
    backend: BackendTag
    n: int
    precision: str
    mflops: float
    seconds: float
    reps: int


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kernel", "backend", "n", "precision", "mflops", "seconds", "reps"])
        for r in self.rows:
            w.writerow([r.kernel, r.backend.value, r.n, r.precision, f"{r.mflops:.3f}",
                        f"{r.seconds:.6e}", r.reps])
        return buf.getvalue()


def bench_axpy(sizes, backends, precision="single", reps: int = 5) -> BenchReport:
    """Median-of-``reps`` timings of ``y <- y + a x`` per (size, backend).

    ``mflops = 2 n / seconds / 1e6``. A warm-up call precedes each series.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be sorted ascending")
    tags = [BackendTag.parse(b) for b in backends]
    dt = as_precision(precision)
    rng = np.random.default_rng(0)
    report = BenchReport()
    for n in sizes:
        x = DenseVector(rng.random(n), dt)
        y = DenseVector(rng.random(n), dt)
        for tag in tags:
            linalg.axpy(y, 1e-3, x, tag)
            timings = []
            for _ in range(max(1, reps)):
                t0 = time.perf_counter()
                linalg.axpy(y, 1e-3, x, tag)
                timings.append(time.perf_counter() - t0)
            sec = statistics.median(timings)
            report.rows.append(BenchRow("axpy", tag, n, dt.name, 2 * n / sec / 1e6, sec, len(timings)))
    _warn_slow_parallel(report)
    return report


def _warn_slow_parallel(report: BenchReport) -> None:
    by_key = {(r.n, r.backend): r.mflops for r in report.rows}
    for (n, tag), mf in by_key.items():
        base = by_key.get((n, BackendTag.GENERIC))
        if tag is BackendTag.PARALLEL and n >= 10**6 and base and mf < 0.9 * base:
            log.warning("parallel axpy at n=%d reaches %.0f MFLOP/s, below 0.9x generic (%.0f)",
                        n, mf, base)


# -- poisson -----------------------------------------------------------------------

DEFAULT_TOL = {"double": 1e-10, "mixed": 1e-8, "single": 1e-5}


@dataclass
class PoissonRow:
    level: int
    error: float
    reduction: float | None
    report: solvers.SolverReport


def solve_poisson(level: int, mode: str = "double", tol: float | None = None, backend=None,
                  max_cycles: int = 100):
    """Solve the polynomial test problem at ``level``; returns (solution, report)."""
    if mode not in DEFAULT_TOL:
        raise ValueError(f"unknown precision mode {mode!r}")
    tol = DEFAULT_TOL[mode] if tol is None else tol
    prob = fem.polynomial_problem(level)
    b = prob.rhs()
    if mode == "double":
        h = fem.build_hierarchy(level, "double", backend=backend)
        x = DenseVector.zeros_like(b)
        rep = solvers.multigrid_solve(h, x, b, tol, max_cycles, backend=backend)
    elif mode == "single":
        h = fem.build_hierarchy(level, "single", backend=backend)
        bs = linalg.convert_precision(b, "single")
        x = DenseVector.zeros_like(bs)
        rep = solvers.multigrid_solve(h, x, bs, tol, max_cycles, backend=backend)
    else:
        hd = fem.build_hierarchy(level, "double", backend=backend)
        hs = fem.build_hierarchy(level, "single", backend=backend)
        x = DenseVector.zeros_like(b)
        rep = solvers.mixed_defect_correct(hd, hs, x, b, tol, max_cycles, backend=backend)
    return x, rep


def poisson_table(level: int, mode: str = "double", tol: float | None = None, backend=None,
                  min_level: int = 2) -> list[PoissonRow]:
    rows, prev = [], None
    for L in range(min(min_level, level), level + 1):
        x, rep = solve_poisson(L, mode, tol, backend)
        err = fem.l2_error(x.data, fem.polynomial_problem(L).u_exact, L)
        rows.append(PoissonRow(L, err, None if prev is None else prev / err, rep))
        prev = err
    return rows


def format_table(rows: list[PoissonRow], mode: str) -> str:
    lines = [f"# {mode} precision", f"{'level':>5}  {'L2 error':>11}  {'red.':>5}"]
    for r in rows:
        red = "-" if r.reduction is None else f"{r.reduction:.2f}"
        lines.append(f"{r.level:5d}  {r.error:11.4E}  {red:>5}")
    return "\n".join(lines)


def poisson_client(level: int, precision: str = "double", backend=None, tol: float | None = None,
                   min_level: int = 2, out=sys.stdout) -> int:
    if not 1 <= level <= 10:
        raise ValueError("level must be in [1, 10]")
    rows = poisson_table(level, precision, tol, backend, min_level)
    for r in rows:
        print(f"level {r.level}: {r.report}", file=out)
    print(format_table(rows, precision), file=out)
    return 0 if all(r.report.converged for r in rows) else 1


# -- shallow water -------------------------------------------------------------------

def _fmt(v) -> str:
    return np.format_float_positional(v, unique=True, trim="-")


def write_height_field(state: swe.SweState, path, fmt: str = "csv") -> None:
    """Write water depth; row 0 is y = 0 in both formats.

    CSV holds shortest round-trip decimals. PGM (plain P2) maps depth
    linearly onto 0..255 over the frame's [min, max]; a flat frame is all 0.
    """
    grid = state.grid("h")
    path = Path(path)
    fmt = fmt.lower()
    if fmt == "csv":
        text = "".join(",".join(_fmt(v) for v in row) + "\n" for row in grid)
    elif fmt == "pgm":
        g = grid.astype(np.float64)
        lo, hi = float(g.min()), float(g.max())
        pix = np.zeros(g.shape, dtype=int) if hi <= lo else np.rint(255 * (g - lo) / (hi - lo)).astype(int)
        text = f"P2\n{state.mx} {state.my}\n255\n" + "".join(
            " ".join(str(p) for p in row) + "\n" for row in pix)
    else:
        raise ValueError(f"unknown height-field format {fmt!r}")
    path.write_text(text)


def read_height_csv(path, dtype="double") -> np.ndarray:
    rows = [line.split(",") for line in Path(path).read_text().splitlines() if line]
    return np.array([[float(v) for v in r] for r in rows]).astype(as_precision(dtype))


def swe_client(scenario: str = "circular", m: int = 100, steps: int = 100,
               precision: str = "double", backend=None, out_dir=None, snapshot_every: int = 0,
               fmt: str = "csv", dt: float = 0.1, out=sys.stdout) -> int:
    """Run a scenario; write ``volume_error.csv`` and height snapshots to ``out_dir``.

    Snapshots are taken at step 0, every ``snapshot_every`` steps (0 = never)
    and at the final step.
    """
    config = swe.PrecisionConfig.parse(precision)
    params = swe.SweParams(dt=dt)
    state = swe.make_scenario(scenario, m, params)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def snap(k, st):
        if out_dir is None:
            return
        if k == 0 or k == steps or (snapshot_every > 0 and k % snapshot_every == 0):
            write_height_field(st, out_dir / f"height_{k:06d}.{fmt}", fmt)

    t0 = time.perf_counter()
    try:
        final, diag = swe.run_simulation(state, params, steps, config, backend, out=snap)
    except (swe.SimulationAborted, swe.CflError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if out_dir is not None:
        with open(out_dir / "volume_error.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "time", "rel_vol_err"])
            for k, t, e in diag.rows():
                w.writerow([k, repr(float(t)), repr(float(e))])
    print(f"{scenario} {m}x{m}, {steps} steps, precision {config}: final relative volume error "
          f"{diag.rel_vol_err[-1]:.3e}, min depth {float(final.h.data.min()):.4g} "
          f"({time.perf_counter() - t0:.2f} s)", file=out)
    return 0


# -- entry point -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hwnum", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="runtime config file (overrides $HONEI_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="axpy microbenchmark (CSV on stdout)")
    b.add_argument("--sizes", type=int, nargs="+", default=[10**k for k in range(3, 7)])
    b.add_argument("--backend", nargs="+", default=["generic", "blocked", "parallel"])
    b.add_argument("--precision", default="single", choices=["single", "double"])
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--workers", type=int, help="override worker_count")

    q = sub.add_parser("poisson", help="multigrid Poisson accuracy table")
    q.add_argument("--level", type=int, default=6)
    q.add_argument("--min-level", type=int, default=2)
    q.add_argument("--precision", default="double", choices=["single", "double", "mixed"])
    q.add_argument("--backend")
    q.add_argument("--tol", type=float)

    s = sub.add_parser("swe", help="shallow-water simulation")
    s.add_argument("--scenario", default="circular", choices=[k.value for k in swe.Scenario])
    s.add_argument("--grid", type=int, default=100)
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--precision", default="double",
                   help="single | double | prediction | every:K")
    s.add_argument("--backend")
    s.add_argument("--out", help="output directory")
    s.add_argument("--snapshot-every", type=int, default=0)
    s.add_argument("--format", default="csv", choices=["csv", "pgm"])
    s.add_argument("--dt", type=float, default=0.1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            set_config(load_config(args.config))
        cfg = get_config()
        if args.command == "bench":
            over = {"worker_count": args.workers} if args.workers else {}
            with use_config(cfg, **over):
                rep = bench_axpy(args.sizes, args.backend, args.precision, args.reps)
            sys.stdout.write(rep.to_csv())
            return 0
        if args.command == "poisson":
            return poisson_client(args.level, args.precision, args.backend, args.tol, args.min_level)
        return swe_client(args.scenario, args.grid, args.steps, args.precision, args.backend,
                          args.out, args.snapshot_every, args.format, args.dt)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
