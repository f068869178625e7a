"""Small numerical kernels: Gauss-Kronrod panels and golden-section search.

Kept in-house because the ratio integrals are evaluated for many ``a`` at
once on a shared mesh, which library quadrature routines do not expose.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

# 15-point Kronrod nodes/weights on [-1, 1] with the embedded 7-point Gauss rule.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (0-based 1, 3, 5, 7, 9, 11, 13)
GAUSS_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def panel_nodes(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Kronrod nodes for each panel, shape (panels, 15)."""
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    return mid[:, None] + half[:, None] * NODES[None, :]


def panel_rules(left, right, values):
    """Kronrod estimate and |Kronrod - Gauss| per panel.

    ``values`` has shape (panels, 15, ...) with trailing batch axes.
    """
    half = 0.5 * (np.asarray(right) - np.asarray(left))
    extra = values.ndim - 2
    hk = half.reshape(half.shape + (1,) * extra)
    wk = KRONROD_WEIGHTS.reshape((15,) + (1,) * extra)
    wg = GAUSS_WEIGHTS.reshape((15,) + (1,) * extra)
    k = hk * np.sum(wk * values, axis=1)
    g = hk * np.sum(wg * values, axis=1)
    return k, np.abs(k - g)


def adaptive_mesh(func: Callable[[np.ndarray], np.ndarray], edges, tol: float,
                  max_panels: int = 20000, min_width: float = 1e-14):
    """Refine ``edges`` until every panel's GK15 error is below its share of ``tol``.

    ``func`` maps an array of points to values of the same shape (or with
    trailing batch axes).  Returns the sorted panel edges.
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    span = edges[-1] - edges[0]
    while True:
        left, right = edges[:-1], edges[1:]
        vals = func(panel_nodes(left, right))
        _, err = panel_rules(left, right, vals)
        if err.ndim > 1:
            err = err.reshape(err.shape[0], -1).max(axis=1)
        allowed = tol * (right - left) / span
        bad = (err > allowed) & (right - left > min_width)
        if not bad.any():
            return edges
        if len(edges) + bad.sum() > max_panels:
            raise RuntimeError("adaptive mesh exceeded its panel budget")
        mids = 0.5 * (left[bad] + right[bad])
        edges = np.sort(np.concatenate([edges, mids]))


def integrate(func, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Adaptive GK15 integral of a scalar-valued vectorized ``func``."""
    edges = adaptive_mesh(func, [lo, hi], tol)
    k, _ = panel_rules(edges[:-1], edges[1:], func(panel_nodes(edges[:-1], edges[1:])))
    return math.fsum(k)


# Gauss-Legendre rule used for partial (node-to-panel-edge) integrals.
GL_X, GL_W = np.polynomial.legendre.leggauss(15)

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_min(func: Callable[[float], float], lo: float, hi: float, xtol: float = 1e-7):
    """Golden-section minimisation on [lo, hi]; returns (x, f(x)).

    Endpoint values are compared too, so a monotone objective returns the
    boundary rather than a point ``xtol`` inside it.
    """
    a, b = lo, hi
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = func(c), func(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = func(d)
    best = min(((fc, c), (fd, d), (func(lo), lo), (func(hi), hi)))
    return best[1], best[0]


def grid_then_golden(func_vec: Callable[[np.ndarray], np.ndarray],
                     func: Callable[[float], float], lo: float, hi: float,
                     points: int = 512, xtol: float = 1e-7):
    """Minimise by scanning a grid, then refining around the best grid point."""
    grid = np.linspace(lo, hi, points + 1)
    vals = np.asarray(func_vec(grid))
    i = int(np.argmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, points)]
    x, fx = golden_min(func, a, b, xtol)
    if vals[i] < fx:
        return float(grid[i]), float(vals[i])
    return float(x), float(fx)
