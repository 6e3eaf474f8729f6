"""Bilinear (Q1) finite elements for -Laplace(u) = f on the unit square.

Level ``L`` has ``m = 2**L + 1`` nodes per side and mesh width ``1 / 2**L``.
Dirichlet nodes are enforced by unit rows in the stiffness matrix; their
right-hand-side entries hold the boundary values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .containers import BandedMatrix, DenseVector, Layout, as_precision
from .solvers import GridHierarchy, GridLevel

MAX_LEVEL = 12
SIDES = frozenset({"left", "right", "bottom", "top"})

# element stiffness, local nodes (0,0) (1,0) (1,1) (0,1)
_KE = np.array([[4, -1, -2, -1],
                [-1, 4, -1, -2],
                [-2, -1, 4, -1],
                [-1, -2, -1, 4]], dtype=np.float64) / 6.0
_LOCAL = ((0, 0), (1, 0), (1, 1), (0, 1))

_G = 0.5 / np.sqrt(3.0)
GAUSS_2X2 = [((0.5 + sx * _G, 0.5 + sy * _G), 0.25) for sy in (-1, 1) for sx in (-1, 1)]


def _check_level(L: int) -> int:
    if not 1 <= L <= MAX_LEVEL:
        raise ValueError(f"level {L} outside [1, {MAX_LEVEL}]")
    return 2 ** L + 1


def dirichlet_mask(m: int, sides=SIDES) -> np.ndarray:
    sides = frozenset(sides)
    if not sides <= SIDES:
        raise ValueError(f"unknown sides {sorted(sides - SIDES)}")
    mask = np.zeros((m, m), dtype=bool)
    if "bottom" in sides:
        mask[0, :] = True
    if "top" in sides:
        mask[-1, :] = True
    if "left" in sides:
        mask[:, 0] = True
    if "right" in sides:
        mask[:, -1] = True
    return mask.ravel()


def _element_nodes(m: int) -> list[np.ndarray]:
    J, I = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="ij")
    return [((J + dj) * m + (I + di)).ravel() for di, dj in _LOCAL]


def assemble_q1_stiffness(L: int, dirichlet=SIDES, dtype="double") -> BandedMatrix:
    """Q1 stiffness matrix in the fixed 9-band layout.

    Interior rows carry the h-independent stencil 8/3 at the centre and -1/3
    at all eight neighbours. Rows of nodes on the ``dirichlet`` sides are
    replaced by unit rows; other boundary nodes keep their natural
    (homogeneous Neumann) rows.
    """
    m = _check_level(L)
    n = m * m
    nodes = _element_nodes(m)
    bands: dict[int, np.ndarray] = {}
    for a in range(4):
        for b in range(4):
            k = _LOCAL[b][0] - _LOCAL[a][0] + m * (_LOCAL[b][1] - _LOCAL[a][1])
            band = bands.setdefault(k, np.zeros(n))
            np.add.at(band, nodes[a], _KE[a, b])
    mask = dirichlet_mask(m, dirichlet)
    for k, band in bands.items():
        band[mask] = 1.0 if k == 0 else 0.0
    A = BandedMatrix(n, "double", Layout.Q1_FIXED)
    for k in sorted(bands):
        A.insert_band(k, bands[k])
    return A if as_precision(dtype) == A.dtype else A.astype(dtype)


def node_coordinates(L: int) -> tuple[np.ndarray, np.ndarray]:
    m = 2 ** L + 1
    t = np.linspace(0.0, 1.0, m)
    X, Y = np.meshgrid(t, t, indexing="xy")
    return X.ravel(), Y.ravel()


def assemble_rhs(L: int, f: Callable, bc: Callable | None = None, dirichlet=SIDES,
                 dtype="double") -> DenseVector:
    """Load vector by 2x2 Gauss quadrature per element; Dirichlet rows get ``bc``.

    ``f`` and ``bc`` are vectorised callables ``(x, y) -> values``; ``bc=None``
    means homogeneous boundary values.
    """
    m = _check_level(L)
    h = 1.0 / (m - 1)
    nodes = _element_nodes(m)
    J, I = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="ij")
    x0, y0 = (I * h).ravel(), (J * h).ravel()
    b = np.zeros(m * m)
    for (xi, eta), w in GAUSS_2X2:
        fv = np.broadcast_to(f(x0 + xi * h, y0 + eta * h), x0.shape) * (w * h * h)
        for a, (di, dj) in enumerate(_LOCAL):
            phi = (xi if di else 1 - xi) * (eta if dj else 1 - eta)
            np.add.at(b, nodes[a], fv * phi)
    mask = dirichlet_mask(m, dirichlet)
    if bc is None:
        b[mask] = 0.0
    else:
        X, Y = node_coordinates(L)
        b[mask] = np.broadcast_to(bc(X, Y), X.shape)[mask]
    return DenseVector(b, dtype)


def l2_error(u_h, u_exact: Callable, L: int) -> float:
    """L2 norm of (Q1 interpolant of nodal ``u_h``) - ``u_exact`` on the unit square.

    Integrated with 2x2 Gauss points per element, always in double precision.
    """
    m = 2 ** L + 1
    u = np.asarray(u_h, dtype=np.float64).ravel()
    if u.shape[0] != m * m:
        raise ValueError(f"vector length {u.shape[0]} != {m * m} for level {L}")
    h = 1.0 / (m - 1)
    nodes = _element_nodes(m)
    J, I = np.meshgrid(np.arange(m - 1), np.arange(m - 1), indexing="ij")
    x0, y0 = (I * h).ravel(), (J * h).ravel()
    total = 0.0
    for (xi, eta), w in GAUSS_2X2:
        uh = np.zeros_like(x0)
        for a, (di, dj) in enumerate(_LOCAL):
            uh += (xi if di else 1 - xi) * (eta if dj else 1 - eta) * u[nodes[a]]
        err = uh - u_exact(x0 + xi * h, y0 + eta * h)
        total += w * h * h * float(np.dot(err, err))
    return float(np.sqrt(total))


@dataclass(frozen=True)
class PoissonProblem:
    """Dirichlet problem with known solution ``u_exact`` and ``f = -Laplace(u_exact)``."""

    level: int
    f: Callable
    u_exact: Callable | None = None

    @property
    def m(self) -> int:
        return 2 ** self.level + 1

    @property
    def h(self) -> float:
        return 1.0 / 2 ** self.level

    @property
    def n(self) -> int:
        return self.m * self.m

    def with_level(self, level: int) -> "PoissonProblem":
        return PoissonProblem(level, self.f, self.u_exact)

    def matrix(self, dtype="double") -> BandedMatrix:
        return assemble_q1_stiffness(self.level, dtype=dtype)

    def rhs(self, dtype="double") -> DenseVector:
        return assemble_rhs(self.level, self.f, self.u_exact, dtype=dtype)


def polynomial_problem(level: int, offset: bool = True) -> PoissonProblem:
    """``u = x(1-x) y(1-y) (1 + x y) + (1 + x + y)`` with matching Dirichlet data.

    The linear offset is reproduced exactly by Q1 elements, so discretisation
    errors are those of the bubble part alone, while the O(1) solution
    magnitude exposes single-precision rounding in the residual. Pass
    ``offset=False`` for the homogeneous variant.
    """
    c = 1.0 if offset else 0.0

    def u(x, y):
        return x * (1 - x) * y * (1 - y) * (1 + x * y) + c * (1 + x + y)

    def f(x, y):
        # -Laplace(p q + (x p)(y q)) with p = x(1-x), q = y(1-y)
        p, q = x * (1 - x), y * (1 - y)
        px, qy = x * x * (1 - x), y * y * (1 - y)
        return 2 * q + 2 * p - (2 - 6 * x) * qy - px * (2 - 6 * y)

    return PoissonProblem(level, f, u)


def build_hierarchy(L_max: int, precision="double", L_min: int = 1, dirichlet=SIDES,
                    **options) -> GridHierarchy:
    """Stiffness matrices for levels ``L_min..L_max``, coarsest first.

    Lower precisions are rounded from the double assembly. ``options`` go to
    :class:`GridHierarchy` (``omega``, ``smooth_steps``, ...).
    """
    _check_level(L_max)
    if not 1 <= L_min <= L_max:
        raise ValueError(f"need 1 <= L_min <= L_max, got {L_min}, {L_max}")
    dt = as_precision(precision)
    levels = []
    for L in range(L_min, L_max + 1):
        A = assemble_q1_stiffness(L, dirichlet)
        levels.append(GridLevel(A.astype(dt), 2 ** L + 1, dirichlet_mask(2 ** L + 1, dirichlet)))
    options.setdefault("coarse_tol", 1e-12 if dt == np.float64 else 1e-6)
    return GridHierarchy(levels, dt, **options)
