"""Backend-dispatched BLAS-1 style kernels and banded matrix-vector products.

Every public operation takes an optional ``backend`` (tag or name; ``None``
means the configured default), checks shapes and precisions, reports its
operands to the memory arbiter and dispatches to a range kernel.

Elementwise kernels and matvecs compute each output slot with the same
operation sequence on every backend, so results are bitwise identical.
Reductions sum each range with numpy's pairwise summation and then combine
range partials left to right, which makes them deterministic for a fixed
``(n, backend, block_size, worker_count)``.
"""

from __future__ import annotations

import numpy as np

from .backends import BackendTag, dispatch, register, resolve_tag, run_ranges, touch
from .containers import BandedMatrix, DenseVector, Layout, PrecisionMismatch, as_precision

ALL = (BackendTag.GENERIC, BackendTag.BLOCKED, BackendTag.PARALLEL)


def _same(*vs):
    n, dt = len(vs[0]), vs[0].dtype
    for v in vs[1:]:
        if len(v) != n:
            raise ValueError(f"length mismatch: {len(v)} != {n}")
        if v.dtype != dt:
            raise PrecisionMismatch(f"precision mismatch: {v.dtype} vs {dt}")
    return n, dt


def _combine(partials, dtype):
    total = dtype.type(0)
    for p in partials:
        total = total + p
    return total


# -- kernels on raw arrays ---------------------------------------------------

@register("axpy", *ALL)
def _axpy(tag, y, alpha, x):
    def body(lo, hi):
        y[lo:hi] += alpha * x[lo:hi]
    run_ranges(tag, y.shape[0], body)


@register("scaled_sum", *ALL)
def _scaled_sum(tag, r, a, b, alpha, beta):
    def body(lo, hi):
        r[lo:hi] = alpha * a[lo:hi] + beta * b[lo:hi]
    run_ranges(tag, r.shape[0], body)


_ELEMENTWISE = {
    "sum": lambda a, b, s: a + b,
    "difference": lambda a, b, s: a - b,
    "product": lambda a, b, s: a * b,
    "scale": lambda a, b, s: s * a,
}


@register("elementwise", *ALL)
def _elementwise(tag, op, out, a, b, alpha):
    f = _ELEMENTWISE[op]

    def body(lo, hi):
        out[lo:hi] = f(a[lo:hi], None if b is None else b[lo:hi], alpha)
    run_ranges(tag, out.shape[0], body)


@register("dot", *ALL)
def _dot(tag, x, y):
    parts = run_ranges(tag, x.shape[0], lambda lo, hi: np.add.reduce(x[lo:hi] * y[lo:hi]))
    return _combine(parts, x.dtype)


def _matvec_rows(bands, x, lo, hi, q1_pad=None):
    """Rows ``[lo, hi)`` of ``A @ x``; bands summed in ascending offset order."""
    n = x.shape[0]
    acc = np.zeros(hi - lo, dtype=x.dtype)
    if q1_pad is not None:
        xp, p = q1_pad
        for k, band in bands:
            acc += band[lo:hi] * xp[lo + k + p:hi + k + p]
        return acc
    for k, band in bands:
        a, b = max(lo, -k), min(hi, n - k)
        if a < b:
            acc[a - lo:b - lo] += band[a:b] * x[a + k:b + k]
    return acc


def _padded(x, m):
    p = m + 1
    xp = np.zeros(x.shape[0] + 2 * p, dtype=x.dtype)
    xp[p:p + x.shape[0]] = x
    return xp, p


@register("banded_matvec", *ALL)
def _banded_matvec(tag, out, bands, x, q1_m=None):
    pad = None if q1_m is None else _padded(x, q1_m)

    def body(lo, hi):
        out[lo:hi] = _matvec_rows(bands, x, lo, hi, pad)
    run_ranges(tag, x.shape[0], body)


@register("residual_norm", *ALL)
def _residual_norm(tag, alpha, y, beta, bands, x, q1_m=None):
    pad = None if q1_m is None else _padded(x, q1_m)

    def body(lo, hi):
        t = alpha * y[lo:hi] + beta * _matvec_rows(bands, x, lo, hi, pad)
        return np.add.reduce(t * t)
    parts = run_ranges(tag, x.shape[0], body)
    return _combine(parts, x.dtype)


@register("convert_precision")
def _convert(tag, x, dtype):
    return x.astype(dtype)


# -- public operations -------------------------------------------------------

def axpy(y: DenseVector, alpha: float, x: DenseVector, backend=None) -> None:
    """``y <- y + alpha * x`` in place."""
    _same(y, x)
    tag = resolve_tag(backend)
    touch(tag, reads=(x,), writes=(y,))
    dispatch("axpy", tag, y.data, y.dtype.type(alpha), x.data)


def scaled_sum(r: DenseVector, a: DenseVector, b: DenseVector, alpha: float, beta: float,
               backend=None) -> None:
    """``r <- alpha * a + beta * b`` in place."""
    _same(r, a, b)
    tag = resolve_tag(backend)
    touch(tag, reads=(a, b), writes=(r,))
    t = r.dtype.type
    dispatch("scaled_sum", tag, r.data, a.data, b.data, t(alpha), t(beta))


def elementwise(op: str, a: DenseVector, b: DenseVector | None = None, *, alpha: float | None = None,
                out: DenseVector | None = None, backend=None) -> DenseVector:
    """Apply ``sum``, ``difference``, ``product`` or ``scale`` slot by slot.

    ``scale`` uses ``alpha`` and ignores ``b``. The result goes to ``out``
    (which may alias an input) or to a fresh vector.
    """
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    if op == "scale":
        if alpha is None:
            raise ValueError("scale needs alpha")
        operands = (a,)
    else:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        operands = (a, b)
    if out is None:
        out = DenseVector.zeros_like(a)
    _same(out, *operands)
    tag = resolve_tag(backend)
    touch(tag, reads=operands, writes=(out,))
    s = None if alpha is None else a.dtype.type(alpha)
    dispatch("elementwise", tag, op, out.data, a.data, None if b is None or op == "scale" else b.data, s)
    return out


def dot(x: DenseVector, y: DenseVector, backend=None) -> float:
    _same(x, y)
    tag = resolve_tag(backend)
    touch(tag, reads=(x, y))
    return dispatch("dot", tag, x.data, y.data)


def norm_l2(x: DenseVector, squared: bool = False, backend=None):
    s = dot(x, x, backend)
    return s if squared else np.sqrt(s)


def _matvec_args(A: BandedMatrix, x: DenseVector):
    if A.n != len(x):
        raise ValueError(f"dimension mismatch: matrix order {A.n}, vector length {len(x)}")
    if A.dtype != x.dtype:
        raise PrecisionMismatch(f"precision mismatch: {A.dtype} vs {x.dtype}")
    bands = [(k, A.bands[k]) for k in sorted(A.bands)]
    q1_m = A.m if A.layout is Layout.Q1_FIXED else None
    return bands, q1_m


def banded_matvec(A: BandedMatrix, x: DenseVector, out: DenseVector | None = None,
                  backend=None) -> DenseVector:
    """``y = A @ x``. ``out`` must not alias ``x``."""
    bands, q1_m = _matvec_args(A, x)
    if out is None:
        out = DenseVector.zeros_like(x)
    _same(out, x)
    if out.data is x.data:
        raise ValueError("banded_matvec output may not alias its input")
    tag = resolve_tag(backend)
    touch(tag, reads=(A, x), writes=(out,))
    dispatch("banded_matvec", tag, out.data, bands, x.data, q1_m)
    return out


def residual_norm(alpha: float, y: DenseVector, beta: float, A: BandedMatrix, x: DenseVector,
                  backend=None):
    """Fused ``||alpha*y + beta*A@x||_2`` in one pass over the rows."""
    bands, q1_m = _matvec_args(A, x)
    _same(y, x)
    tag = resolve_tag(backend)
    touch(tag, reads=(A, x, y))
    t = x.dtype.type
    return np.sqrt(dispatch("residual_norm", tag, t(alpha), y.data, t(beta), bands, x.data, q1_m))


def convert_precision(x: DenseVector, precision, backend=None) -> DenseVector:
    """Round-to-nearest copy of ``x`` in another precision."""
    dt = as_precision(precision)
    tag = resolve_tag(backend)
    out = DenseVector(dispatch("convert_precision", tag, x.data, dt))
    touch(tag, reads=(x,), writes=(out,))
    return out


def defect(b: DenseVector, A: BandedMatrix, x: DenseVector, out: DenseVector | None = None,
           backend=None) -> DenseVector:
    """``b - A @ x`` built from a matvec and an elementwise difference."""
    ax = banded_matvec(A, x, backend=backend)
    return elementwise("difference", b, ax, out=out, backend=backend)


def copy_into(dst: DenseVector, src: DenseVector, backend=None) -> None:
    elementwise("scale", src, alpha=1.0, out=dst, backend=backend)

