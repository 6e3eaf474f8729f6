"""Iterative solvers on banded matrices: damped Jacobi, CG, geometric multigrid
and a mixed-precision defect-correction driver.

Grids are square tensor-product node grids with ``m = 2**level + 1`` points
per side, numbered ``j * m + i`` with ``i`` running along x.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .backends import register, dispatch, resolve_tag, touch
from .containers import BandedMatrix, DenseVector, as_precision


class SolverError(RuntimeError):
    pass


@dataclass
class SolverReport:
    iterations: int
    residual_history: list[float]
    converged: bool
    wall_time: float = 0.0
    status: str = ""

    @property
    def reduction(self) -> float:
        h = self.residual_history
        return h[-1] / h[0] if h[0] else 0.0

    def __str__(self) -> str:
        state = "converged" if self.converged else (self.status or "not converged")
        return (f"{state} after {self.iterations} iterations, residual "
                f"{self.residual_history[0]:.3e} -> {self.residual_history[-1]:.3e} "
                f"({self.wall_time:.3f} s)")


@dataclass
class GridLevel:
    A: BandedMatrix
    m: int
    dirichlet: np.ndarray | None = None  # bool mask of unit rows

    @property
    def n(self) -> int:
        return self.m * self.m


@dataclass
class GridHierarchy:
    """Per-level operators, coarsest first.

    ``coarse_rhs_scale`` multiplies restricted residuals at free coarse
    nodes. Finite-element stiffness matrices of the 2D Laplacian do not scale
    with the mesh width while load vectors scale with its square, so
    matching a rediscretised coarse operator needs a factor 4 on top of full
    weighting.
    """

    levels: list[GridLevel]
    precision: np.dtype = np.dtype(np.float64)
    omega: float = 0.7
    smooth_steps: int = 2
    coarse_tol: float = 1e-12
    coarse_maxit: int = 1000
    coarse_rhs_scale: float = 4.0
    backend: object = None
    _inv_diag: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.levels:
            raise ValueError("hierarchy needs at least one level")
        self.precision = as_precision(self.precision)
        for lev in self.levels:
            if lev.A.dtype != self.precision:
                raise ValueError("level matrix precision differs from hierarchy precision")

    @property
    def finest(self) -> int:
        return len(self.levels) - 1


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        rep = fn(*args, **kwargs)
        rep.wall_time = time.perf_counter() - t0
        return rep
    wrapper.__doc__, wrapper.__name__ = fn.__doc__, fn.__name__
    return wrapper


def inverse_diagonal(A: BandedMatrix) -> DenseVector:
    d = A.diagonal()
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise SolverError(f"zero diagonal entry in row {zero[0]}")
    return DenseVector(A.dtype.type(1) / d)


def jacobi_smooth(A: BandedMatrix, x: DenseVector, b: DenseVector, omega: float = 0.7,
                  steps: int = 2, backend=None, inv_diag: DenseVector | None = None) -> None:
    """``steps`` sweeps of ``x <- x + omega * D^-1 (b - A x)`` in place."""
    if steps <= 0:
        return
    dinv = inverse_diagonal(A) if inv_diag is None else inv_diag
    r = DenseVector.zeros_like(x)
    for _ in range(steps):
        la.defect(b, A, x, out=r, backend=backend)
        la.elementwise("product", r, dinv, out=r, backend=backend)
        la.axpy(x, omega, r, backend=backend)


@_timed
def cg_solve(A: BandedMatrix, x: DenseVector, b: DenseVector, tol: float = 1e-12,
             maxit: int = 1000, backend=None) -> SolverReport:
    """Unpreconditioned conjugate gradients, in place on ``x``.

    Stops once ``||r_k|| <= tol * ||r_0||``. A non-positive curvature
    ``p^T A p`` ends the iteration with ``status="breakdown"``.
    """
    r = la.defect(b, A, x, backend=backend)
    rho = la.dot(r, r, backend)
    r0 = float(np.sqrt(rho))
    history = [r0]
    if r0 == 0.0:
        return SolverReport(0, history, True)
    p = r.copy()
    q = DenseVector.zeros_like(x)
    for it in range(1, maxit + 1):
        la.banded_matvec(A, p, out=q, backend=backend)
        pq = la.dot(p, q, backend)
        if not pq > 0:
            return SolverReport(it - 1, history, False, status="breakdown")
        alpha = rho / pq
        la.axpy(x, alpha, p, backend)
        la.axpy(r, -alpha, q, backend)
        rho_new = la.dot(r, r, backend)
        history.append(float(np.sqrt(rho_new)))
        if history[-1] <= tol * r0:
            return SolverReport(it, history, True)
        la.scaled_sum(p, r, p, 1.0, rho_new / rho, backend)
        rho = rho_new
    return SolverReport(maxit, history, False, status="maxit")


# -- grid transfers ------------------------------------------------------------

def _side(v: DenseVector, m: int, what: str) -> np.ndarray:
    if m < 2 or len(v) != m * m:
        raise ValueError(f"{what}: length {len(v)} does not match a {m}x{m} grid")
    return v.data.reshape(m, m)


@register("prolongate")
def _prolongate(tag, c):
    mc = c.shape[0]
    mf = 2 * mc - 1
    f = np.empty((mf, mf), dtype=c.dtype)
    half, quarter = c.dtype.type(0.5), c.dtype.type(0.25)
    f[::2, ::2] = c
    f[::2, 1::2] = half * (c[:, :-1] + c[:, 1:])
    f[1::2, ::2] = half * (c[:-1, :] + c[1:, :])
    f[1::2, 1::2] = quarter * (c[:-1, :-1] + c[:-1, 1:] + c[1:, :-1] + c[1:, 1:])
    return f.ravel()


@register("restrict")
def _restrict(tag, f, boundary):
    w = f.dtype.type
    p = np.pad(f, 1)
    # centred on coincident fine nodes (every other fine node)
    ctr = p[1:-1:2, 1:-1:2]
    edges = p[0:-2:2, 1:-1:2] + p[2::2, 1:-1:2] + p[1:-1:2, 0:-2:2] + p[1:-1:2, 2::2]
    corners = p[0:-2:2, 0:-2:2] + p[0:-2:2, 2::2] + p[2::2, 0:-2:2] + p[2::2, 2::2]
    c = w(0.25) * ctr + w(0.125) * edges + w(0.0625) * corners
    if boundary == "inject":
        inj = f[::2, ::2]
        c[0, :], c[-1, :], c[:, 0], c[:, -1] = inj[0, :], inj[-1, :], inj[:, 0], inj[:, -1]
    return c.ravel()


def prolongate(coarse: DenseVector, m_coarse: int, backend=None) -> DenseVector:
    """Bilinear interpolation onto the next finer grid (``2*m_coarse - 1`` per side)."""
    c = _side(coarse, m_coarse, "prolongate")
    tag = resolve_tag(backend)
    out = DenseVector(dispatch("prolongate", tag, c))
    touch(tag, reads=(coarse,), writes=(out,))
    return out


def restrict(fine: DenseVector, m_fine: int, boundary: str = "inject", backend=None) -> DenseVector:
    """Full-weighting restriction to the next coarser grid.

    Interior coarse nodes get the (1/16)[1 2 1; 2 4 2; 1 2 1] stencil.
    ``boundary="inject"`` copies coincident fine values on the boundary;
    ``boundary="transpose"`` applies the truncated stencil there as well, which
    is exactly a quarter of the transposed prolongation.
    """
    if m_fine % 2 == 0:
        raise ValueError("restrict: fine grid size must be odd")
    if boundary not in ("inject", "transpose"):
        raise ValueError(f"unknown boundary mode {boundary!r}")
    f = _side(fine, m_fine, "restrict")
    tag = resolve_tag(backend)
    out = DenseVector(dispatch("restrict", tag, f, boundary))
    touch(tag, reads=(fine,), writes=(out,))
    return out


# -- multigrid -------------------------------------------------------------------

def _dinv(h: GridHierarchy, level: int) -> DenseVector:
    d = h._inv_diag.get(level)
    if d is None:
        d = h._inv_diag[level] = inverse_diagonal(h.levels[level].A)
    return d


def v_cycle(h: GridHierarchy, level: int, x: DenseVector, b: DenseVector, backend=None) -> None:
    """One V-cycle on ``level`` (0 = coarsest), updating ``x`` in place."""
    if not 0 <= level <= h.finest:
        raise ValueError(f"level {level} outside hierarchy [0, {h.finest}]")
    backend = h.backend if backend is None else backend
    lev = h.levels[level]
    if level == 0:
        cg_solve(lev.A, x, b, h.coarse_tol, h.coarse_maxit, backend=backend)
        return
    dinv = _dinv(h, level)
    jacobi_smooth(lev.A, x, b, h.omega, h.smooth_steps, backend, dinv)
    r = la.defect(b, lev.A, x, backend=backend)
    coarse = h.levels[level - 1]
    rc = restrict(r, lev.m, boundary="transpose", backend=backend)
    rc = la.elementwise("scale", rc, alpha=h.coarse_rhs_scale, out=rc, backend=backend)
    if coarse.dirichlet is not None:
        rc.data[coarse.dirichlet] = 0
    xc = DenseVector.zeros_like(rc)
    v_cycle(h, level - 1, xc, rc, backend)
    la.axpy(x, 1.0, prolongate(xc, coarse.m, backend), backend)
    jacobi_smooth(lev.A, x, b, h.omega, h.smooth_steps, backend, dinv)


def apply_dirichlet(level: GridLevel, x: DenseVector, b: DenseVector) -> None:
    """Copy boundary values from the unit rows of ``b`` into ``x``."""
    if level.dirichlet is not None:
        x.data[level.dirichlet] = b.data[level.dirichlet]


@_timed
def multigrid_solve(h: GridHierarchy, x: DenseVector, b: DenseVector, tol: float = 1e-10,
                    max_cycles: int = 50, backend=None, stall_cycles: int = 3) -> SolverReport:
    """Repeat V-cycles on the finest level until ``||r|| <= tol * ||r_0||``.

    The iteration also stops (``status="stalled"``) once ``stall_cycles``
    consecutive cycles fail to lower the residual, which is where a
    low-precision hierarchy hits its rounding floor.
    """
    top = h.finest
    A = h.levels[top].A
    apply_dirichlet(h.levels[top], x, b)
    history = [float(la.norm_l2(la.defect(b, A, x, backend=backend), backend=backend))]
    if history[0] == 0.0:
        return SolverReport(0, history, True)
    best, since_best = history[0], 0
    for cycle in range(1, max_cycles + 1):
        v_cycle(h, top, x, b, backend)
        res = float(la.norm_l2(la.defect(b, A, x, backend=backend), backend=backend))
        history.append(res)
        if not np.isfinite(res):
            return SolverReport(cycle, history, False, status="diverged")
        if res <= tol * history[0]:
            return SolverReport(cycle, history, True)
        if res < best:
            best, since_best = res, 0
        else:
            since_best += 1
            if since_best >= stall_cycles:
                return SolverReport(cycle, history, False, status="stalled")
    return SolverReport(max_cycles, history, False, status="max_cycles")


@_timed
def mixed_defect_correct(h_high: GridHierarchy, h_low: GridHierarchy, x: DenseVector,
                         b: DenseVector, tol: float = 1e-8, max_outer: int = 50,
                         inner_cycles: int = 2, backend=None) -> SolverReport:
    """Defect correction in ``x``'s precision, preconditioned by low-precision V-cycles.

    Each outer step forms ``d = b - A x`` in high precision, solves
    ``A_low c = d`` approximately with ``inner_cycles`` V-cycles from ``c = 0``
    and adds the converted correction to ``x``.
    """
    top = h_high.finest
    if h_low.finest != top or h_low.levels[top].n != h_high.levels[top].n:
        raise ValueError("hierarchies describe different discretisations")
    A = h_high.levels[top].A
    A_low = h_low.levels[top].A
    apply_dirichlet(h_high.levels[top], x, b)
    d = la.defect(b, A, x, backend=backend)
    history = [float(la.norm_l2(d, backend=backend))]
    if history[0] == 0.0:
        return SolverReport(0, history, True)
    for it in range(1, max_outer + 1):
        d_low = la.convert_precision(d, h_low.precision, backend)
        c = DenseVector.zeros_like(d_low)
        for _ in range(inner_cycles):
            v_cycle(h_low, top, c, d_low, backend)
        inner = float(la.residual_norm(1.0, d_low, -1.0, A_low, c, backend))
        if not np.isfinite(inner) or inner > 10.0 * float(la.norm_l2(d_low, backend=backend)):
            return SolverReport(it, history, False, status="inner divergence")
        la.axpy(x, 1.0, la.convert_precision(c, h_high.precision, backend), backend)
        la.defect(b, A, x, out=d, backend=backend)
        history.append(float(la.norm_l2(d, backend=backend)))
        if not np.isfinite(history[-1]):
            return SolverReport(it, history, False, status="diverged")
        if history[-1] <= tol * history[0]:
            return SolverReport(it, history, True)
    return SolverReport(max_outer, history, False, status="max_outer")
