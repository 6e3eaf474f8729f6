"""Vector and banded-matrix containers.

Containers follow an explicit-copy idiom: data is duplicated only through
``copy()``. Assignment and argument passing share storage, and ``view()``
hands out a second handle onto the same block.
"""

from __future__ import annotations

import enum
import itertools
import math
import threading
from typing import Iterable, Mapping

import numpy as np

SINGLE = np.dtype(np.float32)
DOUBLE = np.dtype(np.float64)
PRECISIONS = {"single": SINGLE, "double": DOUBLE}

_ids = itertools.count(1)
_id_lock = threading.Lock()


def next_block_id() -> int:
    with _id_lock:
        return next(_ids)


def as_precision(precision) -> np.dtype:
    """Map ``"single"``/``"double"`` or a float dtype to a numpy dtype."""
    if isinstance(precision, str):
        try:
            return PRECISIONS[precision]
        except KeyError:
            raise ValueError(f"unknown precision {precision!r}") from None
    dt = np.dtype(precision)
    if dt not in (SINGLE, DOUBLE):
        raise ValueError(f"unsupported precision {dt}")
    return dt


class PrecisionMismatch(TypeError):
    pass


class DenseVector:
    """Contiguous real vector with a residency token.

    Parameters
    ----------
    data : array_like
        Values. Always copied into fresh storage unless ``_share`` is used
        internally by :meth:`view`.
    dtype : precision, optional
        ``"single"``, ``"double"`` or a numpy float dtype. Defaults to the
        dtype of ``data`` when it is float32/float64, else double.
    """

    __slots__ = ("data", "block_id")

    def __init__(self, data, dtype=None, *, _share=None):
        if _share is not None:
            self.data, self.block_id = _share
            return
        if dtype is None:
            dtype = getattr(data, "dtype", DOUBLE)
            if dtype not in (SINGLE, DOUBLE):
                dtype = DOUBLE
        arr = np.array(data, dtype=as_precision(dtype), copy=True).ravel()
        if arr.size == 0:
            raise ValueError("vector length must be >= 1")
        self.data = arr
        self.block_id = next_block_id()

    @classmethod
    def full(cls, n: int, fill: float = 0.0, dtype="double") -> "DenseVector":
        if n < 1:
            raise ValueError("vector length must be >= 1")
        return cls(np.full(n, fill, dtype=as_precision(dtype)))

    @classmethod
    def zeros_like(cls, other: "DenseVector") -> "DenseVector":
        return cls(np.zeros_like(other.data))

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def __getitem__(self, i):
        self._check_index(i)
        return self.data[i]

    def __setitem__(self, i, value):
        self._check_index(i)
        self.data[i] = value

    def _check_index(self, i):
        if isinstance(i, (int, np.integer)) and not 0 <= i < len(self):
            raise IndexError(f"index {i} out of range [0, {len(self)})")

    def copy(self) -> "DenseVector":
        return DenseVector(self.data)

    def view(self) -> "DenseVector":
        """Second handle on the same storage and block id."""
        return DenseVector(None, _share=(self.data, self.block_id))

    def to_numpy(self) -> np.ndarray:
        return self.data.copy()

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __repr__(self) -> str:
        return f"DenseVector(len={len(self)}, dtype={self.dtype}, block={self.block_id})"


def create_dense_vector(n: int, fill: float = 0.0, dtype="double") -> DenseVector:
    return DenseVector.full(n, fill, dtype)


class Layout(enum.Enum):
    ARBITRARY = "arbitrary"
    Q1_FIXED = "q1"


def q1_offsets(n: int) -> tuple[int, ...]:
    """Band offsets of the 9-point Q1 stencil for ``n = m*m`` unknowns."""
    m = math.isqrt(n)
    if m * m != n or m < 2:
        raise ValueError(f"Q1 layout needs a square order, got n={n}")
    return tuple(sorted({-m - 1, -m, -m + 1, -1, 0, 1, m - 1, m, m + 1}))


class BandedMatrix:
    """Square matrix stored as full-length diagonals keyed by signed offset.

    Band ``k`` holds entry ``(i, i + k)`` in slot ``i``. Slots whose column
    falls outside ``[0, n)`` are dead and kept at zero so kernels can run
    without range branches.
    """

    def __init__(self, n: int, dtype="double", layout: Layout = Layout.ARBITRARY):
        if n < 1:
            raise ValueError("matrix order must be >= 1")
        self.n = int(n)
        self.dtype = as_precision(dtype)
        self.layout = Layout(layout)
        self.bands: dict[int, np.ndarray] = {}
        self.block_id = next_block_id()
        self._allowed = frozenset(q1_offsets(n)) if self.layout is Layout.Q1_FIXED else None

    @property
    def m(self) -> int:
        return math.isqrt(self.n)

    @property
    def offsets(self) -> list[int]:
        return sorted(self.bands)

    @property
    def nbytes(self) -> int:
        return sum(b.nbytes for b in self.bands.values())

    def insert_band(self, offset: int, values: Iterable[float]) -> None:
        offset = int(offset)
        if abs(offset) >= self.n:
            raise ValueError(f"offset {offset} out of range for n={self.n}")
        if self._allowed is not None and offset not in self._allowed:
            raise ValueError(f"offset {offset} not in Q1 band set {sorted(self._allowed)}")
        band = np.array(values, dtype=self.dtype, copy=True).ravel()
        if band.shape[0] != self.n:
            raise ValueError(f"band length {band.shape[0]} != n={self.n}")
        band[_dead_slots(self.n, offset)] = 0
        self.bands[offset] = band

    def band(self, offset: int) -> np.ndarray:
        """Stored diagonal, or zeros if the band is absent."""
        b = self.bands.get(offset)
        return np.zeros(self.n, dtype=self.dtype) if b is None else b

    def diagonal(self) -> np.ndarray:
        return self.band(0)

    def copy(self) -> "BandedMatrix":
        other = BandedMatrix(self.n, self.dtype, self.layout)
        other.bands = {k: v.copy() for k, v in self.bands.items()}
        return other

    def astype(self, dtype) -> "BandedMatrix":
        """Elementwise-rounded copy in another precision."""
        other = BandedMatrix(self.n, dtype, self.layout)
        other.bands = {k: v.astype(other.dtype) for k, v in self.bands.items()}
        return other

    def with_layout(self, layout: Layout) -> "BandedMatrix":
        other = BandedMatrix(self.n, self.dtype, layout)
        for k, v in self.bands.items():
            other.insert_band(k, v)
        return other

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n), dtype=self.dtype)
        rows = np.arange(self.n)
        for k, band in self.bands.items():
            live = ~_dead_slots(self.n, k)
            out[rows[live], rows[live] + k] = band[live]
        return out

    @classmethod
    def from_dense(cls, dense, layout: Layout = Layout.ARBITRARY, keep_zero_bands=False) -> "BandedMatrix":
        dense = np.asarray(dense)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise ValueError("dense matrix must be square")
        dtype = dense.dtype if dense.dtype in (SINGLE, DOUBLE) else DOUBLE
        mat = cls(n, dtype, layout)
        rows = np.arange(n)
        offsets = q1_offsets(n) if layout is Layout.Q1_FIXED else range(-(n - 1), n)
        for k in offsets:
            live = ~_dead_slots(n, k)
            band = np.zeros(n, dtype=mat.dtype)
            band[live] = dense[rows[live], rows[live] + k]
            if keep_zero_bands or np.any(band):
                mat.insert_band(k, band)
        return mat

    def bands_equal(self, other: "BandedMatrix") -> bool:
        keys = set(self.bands) | set(other.bands)
        return self.n == other.n and all(np.array_equal(self.band(k), other.band(k)) for k in keys)

    def __repr__(self) -> str:
        return (f"BandedMatrix(n={self.n}, dtype={self.dtype}, layout={self.layout.value}, "
                f"offsets={self.offsets}, block={self.block_id})")


def _dead_slots(n: int, offset: int) -> np.ndarray:
    cols = np.arange(n) + offset
    return (cols < 0) | (cols >= n)


def banded_from_bands(n: int, bands: Mapping[int, Iterable[float]], dtype="double",
                      layout: Layout = Layout.ARBITRARY) -> BandedMatrix:
    mat = BandedMatrix(n, dtype, layout)
    for k, v in bands.items():
        mat.insert_band(k, v)
    return mat
