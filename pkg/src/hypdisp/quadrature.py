"""Quadrature rules shared by the transform, kernel and solver code."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

PANEL_ORDER = 32


@lru_cache(maxsize=128)
def _legendre(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(m: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre rule with ``m`` nodes on ``[a, b]``.

    Rules above ``2 * PANEL_ORDER`` nodes are built as composite rules of
    ``PANEL_ORDER`` nodes per panel, which is far cheaper to generate and
    equally accurate for the smooth integrands used here.
    """
    if m <= 2 * PANEL_ORDER:
        x, w = _legendre(m)
        edges = np.array([a, b], dtype=float)
    else:
        npan = -(-m // PANEL_ORDER)
        edges = np.linspace(a, b, npan + 1)
        x, w = _legendre(PANEL_ORDER)
    return composite_gauss(edges, x, w)


def composite_gauss(edges, x=None, w=None, order: int = PANEL_ORDER):
    """Map a reference rule onto each panel ``[edges[k], edges[k+1]]``."""
    if x is None:
        x, w = _legendre(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (1.0 + x)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


# Gauss-Kronrod 7/15 on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
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

GK15_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK15_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss weights placed on the Kronrod nodes (zero on the Kronrod-only ones)
G7_WEIGHTS = np.zeros(15)
G7_WEIGHTS[[1, 3, 5]] = _WG[:3]
G7_WEIGHTS[7] = _WG[3]
G7_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


def gk15_panels(edges):
    """Nodes and Kronrod / Gauss weights for panels given by ``edges``.

    Returns
    -------
    nodes : ndarray, shape (npanel, 15)
    wk, wg : ndarray, shape (npanel, 15)
    """
    edges = np.asarray(edges)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (1.0 + GK15_NODES)
    return nodes, half * GK15_WEIGHTS, half * G7_WEIGHTS


@lru_cache(maxsize=32)
def integration_matrix(m: int):
    """Matrix ``S`` with ``(S @ f)[i] ~ int_{-1}^{x_i} f`` on Gauss nodes.

    Built from the Legendre expansion of the interpolant, used for running
    integrals inside a panel.
    """
    x, w = _legendre(m)
    # values -> Legendre coefficients
    V = np.polynomial.legendre.legvander(x, m - 1)
    coef_from_vals = np.linalg.solve(V, np.eye(m))
    S = np.empty((m, m))
    for j in range(m):
        c = coef_from_vals[:, j]
        ci = np.polynomial.legendre.legint(c, lbnd=-1.0)
        S[:, j] = np.polynomial.legendre.legval(x, ci)
    S.setflags(write=False)
    return S


def loglog_slope(x, y):
    """Least-squares slope of ``log|y|`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)
