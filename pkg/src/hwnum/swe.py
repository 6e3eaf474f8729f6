"""Explicit 2D shallow-water solver in relaxation form.

The state ``U = (h, hu, hv)`` lives on an ``mx * my`` cell grid, numbered
``j * mx + i`` with ``i`` along x. Each timestep is a two-stage SSP
Runge-Kutta scheme. A stage first *corrects* the relaxation variables,
``V = F(U)`` and ``W = G(U)`` (stiff relaxation limit), and then *predicts*

    u_new = a * u + M1 v + M2 w + M3 u + M4 u + dt * S(u)

for every component, where ``M1``/``M2`` are centred differences of the
relaxation variables, ``M3``/``M4`` the upwind dissipation in x and y, and
``a = 1 - 2 cx - 2 cy`` carries the diagonal. All four matrices act on the
grid padded with one ghost layer (width ``mx + 2``) and have exactly the
bands ``-(mx+2), -1, +1, +(mx+2)``. Ghost cells implement reflective walls.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import linalg as la
from .containers import DOUBLE, SINGLE, BandedMatrix, DenseVector, as_precision

G = 9.81


class CflError(ValueError):
    pass


class SimulationAborted(RuntimeError):
    def __init__(self, step: int, reason: str = "non-finite value"):
        super().__init__(f"simulation aborted at step {step}: {reason}")
        self.step = step


@dataclass(frozen=True)
class SweParams:
    """Grid spacing, timestep and relaxation speeds.

    ``lambda_x``/``lambda_y`` of ``None`` are recomputed every step as
    ``max(|u| + sqrt(g h))`` over the grid; fixed values are used verbatim.
    """

    dx: float = 5.0
    dy: float = 5.0
    dt: float = 0.1
    g: float = G
    lambda_x: float | None = None
    lambda_y: float | None = None
    eps_dry: float = 1e-6

    def __post_init__(self):
        if self.eps_dry <= 0:
            raise ValueError("eps_dry must be positive")
        if min(self.dx, self.dy, self.dt) <= 0:
            raise ValueError("dx, dy and dt must be positive")
        for lam in (self.lambda_x, self.lambda_y):
            if lam is not None and lam <= 0:
                raise ValueError("relaxation speeds must be > 0")


class Mode(enum.Enum):
    ALL_SINGLE = "single"
    ALL_DOUBLE = "double"
    EVERY_KTH_DOUBLE = "every"
    PREDICTION_DOUBLE = "prediction"


@dataclass(frozen=True)
class PrecisionConfig:
    mode: Mode = Mode.ALL_DOUBLE
    k: int | None = None

    def __post_init__(self):
        if self.mode is Mode.EVERY_KTH_DOUBLE and (self.k is None or self.k < 2):
            raise ValueError("every-k-th double mode needs k >= 2")

    @classmethod
    def parse(cls, text: str) -> "PrecisionConfig":
        """``single``, ``double``, ``prediction`` or ``every:K``."""
        text = text.strip().lower()
        if text.startswith("every"):
            k = text[5:].lstrip(":=")
            return cls(Mode.EVERY_KTH_DOUBLE, int(k))
        try:
            return cls(Mode(text))
        except ValueError:
            raise ValueError(f"unknown precision config {text!r}") from None

    @property
    def storage(self) -> np.dtype:
        return DOUBLE if self.mode is Mode.ALL_DOUBLE else SINGLE

    def __str__(self) -> str:
        return f"every:{self.k}" if self.mode is Mode.EVERY_KTH_DOUBLE else self.mode.value


ALL_SINGLE = PrecisionConfig(Mode.ALL_SINGLE)
ALL_DOUBLE = PrecisionConfig(Mode.ALL_DOUBLE)
PREDICTION_DOUBLE = PrecisionConfig(Mode.PREDICTION_DOUBLE)


def every_kth_double(k: int) -> PrecisionConfig:
    return PrecisionConfig(Mode.EVERY_KTH_DOUBLE, k)


@dataclass
class SweState:
    mx: int
    my: int
    h: DenseVector
    hu: DenseVector
    hv: DenseVector
    bed: DenseVector
    v: tuple | None = None  # relaxation variables F(U), last stage
    w: tuple | None = None  # relaxation variables G(U), last stage
    time: float = 0.0
    v0: float | None = field(default=None)

    @property
    def dtype(self) -> np.dtype:
        return self.h.dtype

    @property
    def components(self) -> tuple[DenseVector, DenseVector, DenseVector]:
        return self.h, self.hu, self.hv

    def grid(self, which: str = "h") -> np.ndarray:
        """``(my, mx)`` view of a field, row 0 at y = 0."""
        return getattr(self, which).data.reshape(self.my, self.mx)

    def astype(self, dtype) -> "SweState":
        dt = as_precision(dtype)
        conv = (lambda d: d) if dt == self.dtype else (lambda d: la.convert_precision(d, dt))
        return replace(self, h=conv(self.h), hu=conv(self.hu), hv=conv(self.hv),
                       bed=conv(self.bed), v=None, w=None)

    def copy(self) -> "SweState":
        return replace(self, h=self.h.copy(), hu=self.hu.copy(), hv=self.hv.copy(),
                       bed=self.bed.copy(), v=None, w=None)

    def volume(self, params: SweParams) -> float:
        return math.fsum(self.h.data.astype(np.float64)) * params.dx * params.dy


def relative_volume_error(state: SweState, v0: float, params: SweParams | None = None) -> float:
    if v0 <= 0:
        raise ValueError("reference volume must be positive")
    return abs(state.volume(params or SweParams()) - v0) / v0


# -- scenarios -------------------------------------------------------------------

class Scenario(enum.Enum):
    CIRCULAR_DAMBREAK = "circular"
    PARTIAL_DAMBREAK = "partial"
    DRY_BED_DAMBREAK = "drybed"
    UNIFORM = "uniform"


def make_scenario(kind, m: int, params: SweParams | None = None, h_in: float = 10.0,
                  h_out: float | None = None, radius: float | None = None,
                  dtype="double") -> SweState:
    """Initial state on an ``m x m`` grid at rest.

    Circular dambreaks put ``h_in`` inside ``radius`` (default ``0.15 m dx``)
    of the centre and ``h_out`` outside (5 m, or 0 for the dry-bed case). The
    partial dambreak holds ``h_in`` behind a raised-bed wall across the middle
    of the domain, open over its central third, with ``h_out`` downstream.
    """
    kind = Scenario(kind)
    params = params or SweParams()
    if m < 16:
        raise ValueError(f"grid too small: m={m} < 16")
    if h_out is None:
        h_out = {Scenario.DRY_BED_DAMBREAK: 0.0, Scenario.UNIFORM: h_in}.get(kind, 5.0)
    xc = (np.arange(m) + 0.5) * params.dx
    yc = (np.arange(m) + 0.5) * params.dy
    X, Y = np.meshgrid(xc, yc, indexing="xy")
    bed = np.zeros((m, m))
    if kind is Scenario.UNIFORM:
        h = np.full((m, m), h_in)
    elif kind is Scenario.PARTIAL_DAMBREAK:
        h = np.where(X < m * params.dx / 2, h_in, h_out)
        wall = m // 2
        gap = slice(m // 3, m - m // 3)
        bed[:, wall] = 1.5 * h_in
        bed[gap, wall] = 0.0
        h[:, wall] = 0.0
        h[gap, wall] = h_in
    else:
        r0 = 0.15 * m * params.dx if radius is None else radius
        cx, cy = m * params.dx / 2, m * params.dy / 2
        h = np.where((X - cx) ** 2 + (Y - cy) ** 2 <= r0 * r0, h_in, h_out)
    dt = as_precision(dtype)
    zeros = np.zeros(m * m)
    state = SweState(m, m, DenseVector(h, dt), DenseVector(zeros, dt), DenseVector(zeros, dt),
                     DenseVector(bed, dt))
    state.v0 = state.volume(params)
    return state


# -- pointwise physics -------------------------------------------------------------

def _velocities(h, hu, hv, eps):
    wet = h >= eps
    safe = np.where(wet, h, 1)
    zero = h.dtype.type(0)
    return np.where(wet, hu / safe, zero), np.where(wet, hv / safe, zero)


def flux_f(h, hu, hv, g=G, eps_dry=1e-6):
    """x-flux ``(hu, hu^2/h + g h^2 / 2, hu hv / h)``; zero velocity where dry."""
    h, hu, hv = (np.asarray(a) for a in (h, hu, hv))
    u, v = _velocities(h, hu, hv, eps_dry)
    half_g = h.dtype.type(0.5 * g) if h.dtype in (SINGLE, DOUBLE) else 0.5 * g
    return hu, hu * u + half_g * h * h, hu * v


def flux_g(h, hu, hv, g=G, eps_dry=1e-6):
    """y-flux ``(hv, hu hv / h, hv^2/h + g h^2 / 2)``; zero velocity where dry."""
    h, hu, hv = (np.asarray(a) for a in (h, hu, hv))
    u, v = _velocities(h, hu, hv, eps_dry)
    half_g = h.dtype.type(0.5 * g) if h.dtype in (SINGLE, DOUBLE) else 0.5 * g
    return hv, hv * u, hv * v + half_g * h * h


def source_term(state: SweState, params: SweParams):
    """``(0, -g h db/dx, -g h db/dy)``; central differences, one-sided at walls."""
    b = state.grid("bed")
    h = state.grid("h")
    t = state.dtype.type
    dbdx = np.gradient(b, t(params.dx), axis=1, edge_order=1)
    dbdy = np.gradient(b, t(params.dy), axis=0, edge_order=1)
    gh = t(-params.g) * h
    return (DenseVector(np.zeros(h.size, dtype=state.dtype)),
            DenseVector((gh * dbdx).ravel()), DenseVector((gh * dbdy).ravel()))


def relaxation_speeds(state: SweState, params: SweParams) -> tuple[float, float]:
    lx, ly = params.lambda_x, params.lambda_y
    if lx is not None and ly is not None:
        return lx, ly
    h, hu, hv = (c.data.astype(np.float64) for c in state.components)
    u, v = _velocities(h, hu, hv, params.eps_dry)
    c = np.sqrt(params.g * np.maximum(h, 0))
    lx = float(np.max(np.abs(u) + c)) if lx is None else lx
    ly = float(np.max(np.abs(v) + c)) if ly is None else ly
    if not lx > 0 or not ly > 0:
        raise CflError("relaxation speeds must be > 0 (fully dry domain?)")
    return lx, ly


def check_cfl(params: SweParams, lx: float, ly: float) -> None:
    """Positivity-preserving bound ``dt (lx/dx + ly/dy) <= 1``."""
    rate = lx / params.dx + ly / params.dy
    if params.dt * rate > 1.0:
        raise CflError(f"CFL violated: dt={params.dt} exceeds max admissible dt={1.0 / rate:.6g}")


# -- banded predictor ----------------------------------------------------------------

@dataclass
class PredictorOperators:
    M1: BandedMatrix
    M2: BandedMatrix
    M3: BandedMatrix
    M4: BandedMatrix
    alpha: float
    width: int  # padded row length mx + 2

    @property
    def matrices(self) -> tuple[BandedMatrix, ...]:
        return self.M1, self.M2, self.M3, self.M4


@dataclass
class PredictorInput:
    """Padded ``u``, relaxation variables ``v``/``w`` and ``dt * S``, per component."""

    u: tuple
    v: tuple
    w: tuple
    s: tuple
    mx: int
    my: int

    def astype(self, dtype) -> "PredictorInput":
        c = lambda vs: tuple(la.convert_precision(x, dtype) for x in vs)  # noqa: E731
        return replace(self, u=c(self.u), v=c(self.v), w=c(self.w), s=c(self.s))


def _four_band(n, width, dtype, x_coef=(0.0, 0.0), y_coef=(0.0, 0.0)) -> BandedMatrix:
    """Bands -width, -1, +1, +width with constant coefficients (lower, upper)."""
    M = BandedMatrix(n, dtype)
    M.insert_band(-width, np.full(n, y_coef[0]))
    M.insert_band(-1, np.full(n, x_coef[0]))
    M.insert_band(1, np.full(n, x_coef[1]))
    M.insert_band(width, np.full(n, y_coef[1]))
    return M


def predictor_operators(mx: int, my: int, params: SweParams, lx: float, ly: float,
                        dtype="double") -> PredictorOperators:
    width = mx + 2
    n = width * (my + 2)
    dt = as_precision(dtype)
    ax = params.dt / (2 * params.dx)
    ay = params.dt / (2 * params.dy)
    cx, cy = ax * lx, ay * ly
    return PredictorOperators(
        M1=_four_band(n, width, dt, x_coef=(ax, -ax)),
        M2=_four_band(n, width, dt, y_coef=(ay, -ay)),
        M3=_four_band(n, width, dt, x_coef=(cx, cx)),
        M4=_four_band(n, width, dt, y_coef=(cy, cy)),
        alpha=1.0 - 2.0 * cx - 2.0 * cy,
        width=width,
    )


def pad_reflective(field2d: np.ndarray, flip_x: bool = False, flip_y: bool = False) -> np.ndarray:
    """Add one ghost layer: values mirrored, negated normal to the flipped walls."""
    p = np.pad(field2d, 1, mode="edge")
    one = field2d.dtype.type(-1)
    if flip_x:
        p[:, 0] *= one
        p[:, -1] *= one
    if flip_y:
        p[0, :] *= one
        p[-1, :] *= one
    return p


def padded_components(state: SweState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, hu, hv = (state.grid(c) for c in ("h", "hu", "hv"))
    return pad_reflective(h), pad_reflective(hu, flip_x=True), pad_reflective(hv, flip_y=True)


def assemble_predictor(state: SweState, params: SweParams, lam: tuple[float, float] | None = None,
                       dtype=None) -> tuple[PredictorOperators, PredictorInput]:
    """Correct the relaxation variables and build the predictor for one stage.

    ``dtype`` selects the precision of the operators (default: the state's);
    the relaxation variables and source are computed in the state's
    precision.
    """
    lx, ly = relaxation_speeds(state, params) if lam is None else lam
    check_cfl(params, lx, ly)
    ops = predictor_operators(state.mx, state.my, params, lx, ly, dtype or state.dtype)
    up = padded_components(state)
    vp = flux_f(*up, g=params.g, eps_dry=params.eps_dry)
    wp = flux_g(*up, g=params.g, eps_dry=params.eps_dry)
    t = state.dtype.type
    src = []
    for s in source_term(state, params):
        grid = np.zeros_like(up[0])
        grid[1:-1, 1:-1] = t(params.dt) * s.data.reshape(state.my, state.mx)
        src.append(grid)
    vec = lambda arrs: tuple(DenseVector(a.ravel()) for a in arrs)  # noqa: E731
    state.v, state.w = vec(vp), vec(wp)
    return ops, PredictorInput(vec(up), state.v, state.w, vec(src), state.mx, state.my)


def predict(ops: PredictorOperators, inp: PredictorInput, backend=None) -> tuple[DenseVector, ...]:
    """``a u + M1 v + M2 w + M3 u + M4 u + dt S`` per component, on the padded grid."""
    out = []
    for u, v, w, s in zip(inp.u, inp.v, inp.w, inp.s):
        r = la.elementwise("scale", u, alpha=ops.alpha, backend=backend)
        tmp = DenseVector.zeros_like(u)
        for M, x in ((ops.M1, v), (ops.M2, w), (ops.M3, u), (ops.M4, u)):
            la.banded_matvec(M, x, out=tmp, backend=backend)
            la.axpy(r, 1.0, tmp, backend)
        la.axpy(r, 1.0, s, backend)
        out.append(r)
    return tuple(out)


def interior(vec: DenseVector, mx: int, my: int) -> np.ndarray:
    return vec.data.reshape(my + 2, mx + 2)[1:-1, 1:-1].ravel()


def dry_clamp(state: SweState, eps_dry: float) -> None:
    h = state.h.data
    np.maximum(h, 0, out=h)
    dry = h < eps_dry
    state.hu.data[dry] = 0
    state.hv.data[dry] = 0


def _stage(state: SweState, params: SweParams, lam, pred_dtype, backend) -> SweState:
    ops, inp = assemble_predictor(state, params, lam, dtype=pred_dtype)
    if pred_dtype != state.dtype:
        inp = inp.astype(pred_dtype)
    new = tuple(np.ascontiguousarray(interior(r, state.mx, state.my)) for r in predict(ops, inp, backend))
    out = replace(state, h=DenseVector(new[0], state.dtype), hu=DenseVector(new[1], state.dtype),
                  hv=DenseVector(new[2], state.dtype))
    dry_clamp(out, params.eps_dry)
    return out


def timestep(state: SweState, params: SweParams, config: PrecisionConfig = ALL_DOUBLE,
             step_index: int = 0, backend=None) -> SweState:
    """Advance one step with the two-stage predictor/corrector.

    ``U1 = P(U)``, ``U2 = P(U1)``, ``U_next = (U + U2) / 2`` where ``P`` is one
    correct-then-predict stage; the dry clamp follows every stage. The
    returned state keeps the storage precision of ``state``.
    """
    store = state.dtype
    work, pred = store, store
    if config.mode is Mode.EVERY_KTH_DOUBLE and step_index % config.k == 0:
        work = pred = DOUBLE
    elif config.mode is Mode.PREDICTION_DOUBLE:
        pred = DOUBLE
    cur = state if work == store else state.astype(work)
    lam = relaxation_speeds(cur, params)
    u1 = _stage(cur, params, lam, pred, backend)
    u2 = _stage(u1, params, lam, pred, backend)
    half = work.type(0.5)
    comps = [la.elementwise("sum", a, b, backend=backend) for a, b in zip(cur.components, u2.components)]
    comps = [la.elementwise("scale", c, alpha=half, out=c, backend=backend) for c in comps]
    nxt = replace(cur, h=comps[0], hu=comps[1], hv=comps[2], time=state.time + params.dt,
                  v=u2.v, w=u2.w)
    dry_clamp(nxt, params.eps_dry)
    if work != store:
        v0 = state.v0
        nxt = nxt.astype(store)
        nxt.v0 = v0
    if not all(np.all(np.isfinite(c.data)) for c in nxt.components):
        raise SimulationAborted(step_index)
    return nxt


@dataclass
class Diagnostics:
    steps: list[int] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    rel_vol_err: list[float] = field(default_factory=list)

    def record(self, step: int, state: SweState, v0: float, params: SweParams) -> None:
        self.steps.append(step)
        self.times.append(state.time)
        self.rel_vol_err.append(relative_volume_error(state, v0, params))

    def rows(self):
        return list(zip(self.steps, self.times, self.rel_vol_err))


def run_simulation(state: SweState, params: SweParams, steps: int,
                   config: PrecisionConfig = ALL_DOUBLE, backend=None,
                   out: Callable[[int, SweState], None] | None = None) -> tuple[SweState, Diagnostics]:
    """Step ``steps`` times in the config's storage precision.

    The reference volume is taken from the converted initial state. ``out``
    is called with ``(step, state)`` after the initial state and every step.
    """
    cur = state.astype(config.storage) if state.dtype != config.storage else state.copy()
    v0 = cur.volume(params)
    cur.v0 = v0
    diag = Diagnostics()
    diag.record(0, cur, v0, params)
    if out is not None:
        out(0, cur)
    for k in range(1, steps + 1):
        cur = timestep(cur, params, config, step_index=k, backend=backend)
        diag.record(k, cur, v0, params)
        if out is not None:
            out(k, cur)
    return cur, diag
