"""Independent reference implementations used as test oracles.

They avoid the package's kernels: plain Python loops, dense numpy
matrices or compensated summation.
"""

import numpy as np


# -- oracles ---------------------------------------------------------------------

def kahan_sum(values) -> float:
    """Neumaier-compensated sum in Python floats."""
    total, comp = 0.0, 0.0
    for v in values:
        v = float(v)
        t = total + v
        if abs(total) >= abs(v):
            comp += (total - t) + v
        else:
            comp += (v - t) + total
        total = t
    return total + comp


def dense_from_bands(n, bands):
    """Dense matrix from ``{offset: values}`` by explicit (i, i+k) placement."""
    A = np.zeros((n, n))
    for k, vals in bands.items():
        for i in range(n):
            j = i + k
            if 0 <= j < n:
                A[i, j] = vals[i]
    return A


def loop_matvec(bands, x):
    n = len(x)
    y = [0.0] * n
    for i in range(n):
        for k, vals in bands.items():
            j = i + k
            if 0 <= j < n:
                y[i] += float(vals[i]) * float(x[j])
    return np.array(y)


def q1_offset_set(m):
    return {0, 1, -1, m - 1, -(m - 1), m, -m, m + 1, -(m + 1)}


def random_q1_bands(rng, m, spd=False):
    n = m * m
    offs = sorted(q1_offset_set(m))
    bands = {k: rng.uniform(-1, 1, n) for k in offs}
    if spd:
        A = dense_from_bands(n, bands)
        A = 0.5 * (A + A.T)
        A += np.diag(np.abs(A).sum(axis=1) + 1.0)
        bands = {k: np.array([A[i, i + k] if 0 <= i + k < n else 0.0 for i in range(n)])
                 for k in offs}
    return bands


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- shallow water ----------------------------------------------------------------

G = 9.81

def scalar_flux(h, hu, hv, eps=1e-6):
    u = hu / h if h >= eps else 0.0
    v = hv / h if h >= eps else 0.0
    F = (hu, hu * u + 0.5 * G * h * h, hu * v)
    Gf = (hv, hv * u, hv * v + 0.5 * G * h * h)
    return F, Gf


def scalar_source(state, p):
    mx, my = state.mx, state.my
    b = state.bed.data.reshape(my, mx)
    h = state.h.data.reshape(my, mx)
    s1, s2 = np.zeros((my, mx)), np.zeros((my, mx))
    for j in range(my):
        for i in range(mx):
            if i == 0:
                dbx = (b[j, 1] - b[j, 0]) / p.dx
            elif i == mx - 1:
                dbx = (b[j, i] - b[j, i - 1]) / p.dx
            else:
                dbx = (b[j, i + 1] - b[j, i - 1]) / (2 * p.dx)
            if j == 0:
                dby = (b[1, i] - b[0, i]) / p.dy
            elif j == my - 1:
                dby = (b[j, i] - b[j - 1, i]) / p.dy
            else:
                dby = (b[j + 1, i] - b[j - 1, i]) / (2 * p.dy)
            s1[j, i] = -p.g * h[j, i] * dbx
            s2[j, i] = -p.g * h[j, i] * dby
    return s1.ravel(), s2.ravel()


def ghost(a, sign_x=1.0, sign_y=1.0):
    """Reflective ghost layer via explicit index loops."""
    my, mx = a.shape
    p = np.zeros((my + 2, mx + 2))
    for j in range(-1, my + 1):
        for i in range(-1, mx + 1):
            ii, jj, s = i, j, 1.0
            if i < 0:
                ii, s = 0, s * sign_x
            elif i >= mx:
                ii, s = mx - 1, s * sign_x
            if j < 0:
                jj, s = 0, s * sign_y
            elif j >= my:
                jj, s = my - 1, s * sign_y
            p[j + 1, i + 1] = s * a[jj, ii]
    return p


def stencil_stage(state, p, lx, ly):
    """One relaxation stage written as a cell loop (no matrices, no dry clamp).

    Upwind relaxation: u_t + (v_x + w_y) = lx dx/2 u_xx + ly dy/2 u_yy, with
    v = F(u), w = G(u), forward Euler in time.
    """
    mx, my = state.mx, state.my
    comps = [state.h.data.reshape(my, mx), state.hu.data.reshape(my, mx),
             state.hv.data.reshape(my, mx)]
    U = [ghost(comps[0]), ghost(comps[1], sign_x=-1), ghost(comps[2], sign_y=-1)]
    F = [np.zeros_like(U[0]) for _ in range(3)]
    Gw = [np.zeros_like(U[0]) for _ in range(3)]
    for j in range(my + 2):
        for i in range(mx + 2):
            f, g = scalar_flux(U[0][j, i], U[1][j, i], U[2][j, i])
            for c in range(3):
                F[c][j, i], Gw[c][j, i] = f[c], g[c]
    s1, s2 = scalar_source(state, p)
    S = [np.zeros(mx * my), s1, s2]
    out = []
    for c in range(3):
        u, v, w = U[c], F[c], Gw[c]
        new = np.zeros((my, mx))
        for j in range(1, my + 1):
            for i in range(1, mx + 1):
                new[j - 1, i - 1] = (
                    u[j, i]
                    - p.dt / (2 * p.dx) * (v[j, i + 1] - v[j, i - 1])
                    - p.dt / (2 * p.dy) * (w[j + 1, i] - w[j - 1, i])
                    + p.dt * lx / (2 * p.dx) * (u[j, i + 1] - 2 * u[j, i] + u[j, i - 1])
                    + p.dt * ly / (2 * p.dy) * (u[j + 1, i] - 2 * u[j, i] + u[j - 1, i])
                    + p.dt * S[c][(j - 1) * mx + i - 1]
                )
        out.append(new.ravel())
    return out
