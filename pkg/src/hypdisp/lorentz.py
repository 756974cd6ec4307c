"""
Lebesgue and Lorentz norms of radial functions on hyperbolic space.

Two routes are provided.  The closed forms for radially decreasing
functions split the half-line at ``r = 1``, where the volume element
switches from Euclidean ``r^{n-1}`` to exponential ``e^{(n-1) r}``
behaviour; they agree with the true norms only up to constants.  The
rearrangement route sorts the samples by size against the Riemannian
measure of the grid and evaluates the classical quasi-norm

    ||f||_{(p,d)} = ( int_0^inf (t^{1/p} f*(t))^d dt/t )^{1/d}

exactly for the resulting step function.  The solver always uses the
rearrangement route, since its states change sign.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_jacobi

from .quadrature import composite_gauss
from .transform import RadialFunction


class NotMonotoneError(ValueError):
    """The closed-form route needs a non-negative, non-increasing profile."""


class ExponentError(ValueError):
    """Incompatible exponents in a Hölder-type product."""


@dataclass(frozen=True)
class LorentzParams:
    """Lorentz exponents ``(p, d)``, ``1 < p <= inf`` and ``1 <= d <= inf``."""

    p: float
    d: float

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"need p > 1, got {self.p}")
        if not self.d >= 1:
            raise ValueError(f"need d >= 1, got {self.d}")

    @property
    def conjugate(self) -> float:
        """Hölder conjugate ``p' = p / (p - 1)``."""
        return 1.0 if math.isinf(self.p) else self.p / (self.p - 1.0)


@dataclass(frozen=True)
class NormResult:
    """A computed norm.

    Attributes
    ----------
    value : float
    method : str
        ``"lq-formula"``, ``"monotone-formula"`` or ``"rearrangement"``.
    diverging : bool
        The integrand was still significant at the truncation radius.
    details : dict
    """

    value: float
    method: str
    diverging: bool = False
    details: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------

def _evaluator(f, r_max):
    """Return ``(callable, r_max, geometry)`` for a RadialFunction or callable."""
    if isinstance(f, RadialFunction):
        nodes, vals = f.grid.nodes, np.asarray(f.values)
        rr = np.concatenate([-nodes[::-1], nodes])
        vv = np.concatenate([vals[::-1], vals])
        spline = CubicSpline(rr, vv)
        top = nodes[-1] if r_max is None else min(r_max, nodes[-1])
        return spline, float(top), f.grid.geometry
    if not callable(f):
        raise TypeError("expected a RadialFunction or a callable of r")
    if r_max is None:
        raise ValueError("r_max is required for callables")
    return f, float(r_max), None


def _outer_rule(r_max, width=0.5, order=16):
    npan = max(1, int(math.ceil((r_max - 1.0) / width)))
    return composite_gauss(np.linspace(1.0, r_max, npan + 1), order=order)


def _inner_rule(power, m=48):
    """Nodes/weights for ``int_0^1 g(r) r^power dr`` (Gauss-Jacobi)."""
    x, w = roots_jacobi(m, 0.0, power)
    r = 0.5 * (1.0 + x)
    return r, w * 0.5 ** (power + 1.0)


def _tail_flag(vals_tail, weight_tail):
    integrand = np.abs(vals_tail) * weight_tail
    peak = np.max(integrand) if integrand.size else 0.0
    return bool(peak > 0 and integrand[-1] > 1e-6 * peak)


# ---------------------------------------------------------------------------
# L^q by the two-piece formula
# ---------------------------------------------------------------------------

def lq_norm_radial(f, q: float, geometry=None, r_max: float | None = None) -> NormResult:
    """Two-piece ``L^q`` norm of a radial function.

    ``(int_0^1 |f|^q r^{n-1} dr)^{1/q} + (int_1^R |f|^q e^{(n-1) r} dr)^{1/q}``,
    equivalent to the ``L^q(H^n)`` norm up to constants.  ``q = inf`` returns
    the sup.

    Parameters
    ----------
    f : RadialFunction or callable
        Callables are evaluated on an internal rule and need ``geometry``
        and ``r_max``.
    q : float
        ``1 <= q <= inf``.
    geometry : GeometryParams, optional
    r_max : float, optional
        Truncation radius, defaults to the end of the grid.
    """
    if not q >= 1:
        raise ValueError("need q >= 1")
    func, top, geo = _evaluator(f, r_max)
    geometry = geometry or geo
    n = geometry.n
    if math.isinf(q):
        r = np.concatenate([np.linspace(0.0, top, 20001)])
        if isinstance(f, RadialFunction):
            vals = np.concatenate([np.abs(f.values), np.abs(func(r))])
        else:
            vals = np.abs(func(r))
        return NormResult(float(np.max(vals)), "lq-formula")
    ri, wi = _inner_rule(n - 1.0)
    inner = np.sum(np.abs(func(ri)) ** q * wi)
    diverging = False
    outer = 0.0
    if top > 1.0:
        ro, wo = _outer_rule(top)
        vo = np.abs(func(ro)) ** q
        grow = np.exp((n - 1) * ro)
        outer = np.sum(vo * grow * wo)
        diverging = _tail_flag(vo, grow)
    value = inner ** (1.0 / q) + outer ** (1.0 / q)
    return NormResult(float(value), "lq-formula", diverging,
                      {"inner": float(inner), "outer": float(outer)})


def lq_norm_exact(f, q: float, geometry=None, r_max: float | None = None) -> float:
    """True ``L^q(H^n)`` norm ``(|S^{n-1}| int |f|^q sinh^{n-1} r dr)^{1/q}``."""
    func, top, geo = _evaluator(f, r_max)
    geometry = geometry or geo
    n = geometry.n
    if math.isinf(q):
        return lq_norm_radial(f, q, geometry, r_max).value
    ri, wi = _inner_rule(n - 1.0)
    # sinh^{n-1} r = r^{n-1} (sinh r / r)^{n-1}
    inner = np.sum(np.abs(func(ri)) ** q * (np.sinh(ri) / ri) ** (n - 1) * wi)
    outer = 0.0
    if top > 1.0:
        ro, wo = _outer_rule(top)
        outer = np.sum(np.abs(func(ro)) ** q * np.sinh(ro) ** (n - 1) * wo)
    return float((geometry.sphere_area * (inner + outer)) ** (1.0 / q))


# ---------------------------------------------------------------------------
# closed forms for decreasing profiles
# ---------------------------------------------------------------------------

def lorentz_norm_monotone(f, lp: LorentzParams, geometry=None,
                          r_max: float | None = None) -> NormResult:
    """Lorentz norm of a non-negative, non-increasing radial profile.

    For ``d < inf``::

        (int_0^1 f^d r^{dn/p - 1} dr)^{1/d} + (int_1^R f^d e^{d(n-1)r/p} dr)^{1/d}

    and for ``d = inf`` the sum of ``sup_{r<1} r^{n/p} f`` and
    ``sup_{r>=1} e^{(n-1) r/p} f``.

    Raises
    ------
    NotMonotoneError
        If the samples are negative or increase; use
        :func:`lorentz_norm_rearranged` instead.
    """
    func, top, geo = _evaluator(f, r_max)
    geometry = geometry or geo
    n, p, d = geometry.n, lp.p, lp.d
    if isinstance(f, RadialFunction):
        v = np.asarray(f.values, dtype=float)
    else:
        v = np.asarray(func(np.linspace(1e-9, top, 4001)), dtype=float)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if np.any(v < -1e-12 * scale) or np.any(np.diff(v) > 1e-12 * scale):
        raise NotMonotoneError(
            "profile is not non-negative and non-increasing; use lorentz_norm_rearranged")
    if scale == 0:
        return NormResult(0.0, "monotone-formula")
    if math.isinf(d):
        a = 0.0 if math.isinf(p) else n / p
        b = 0.0 if math.isinf(p) else (n - 1) / p
        r_in = np.linspace(0.0, 1.0, 20001)[1:]
        r_out = np.linspace(1.0, top, 40001)
        with np.errstate(over="ignore"):
            first = np.max(r_in ** a * np.abs(func(r_in)))
            tail = np.exp(b * r_out) * np.abs(func(r_out))
        second = np.max(tail)
        diverging = bool(tail[-1] > 1e-6 * second)
        return NormResult(float(first + second), "monotone-formula", diverging)
    power = d * n / p - 1.0
    ri, wi = _inner_rule(power)
    inner = np.sum(np.abs(func(ri)) ** d * wi)
    outer, diverging = 0.0, False
    if top > 1.0:
        ro, wo = _outer_rule(top)
        vo = np.abs(func(ro)) ** d
        grow = np.exp(d * (n - 1) / p * ro)
        outer = np.sum(vo * grow * wo)
        diverging = _tail_flag(vo, grow)
    return NormResult(float(inner ** (1 / d) + outer ** (1 / d)), "monotone-formula", diverging)


# ---------------------------------------------------------------------------
# rearrangement
# ---------------------------------------------------------------------------

def rearrangement(values, measure):
    """Decreasing rearrangement of grid samples.

    Returns
    -------
    levels : ndarray
        ``|f|`` sorted in decreasing order.
    cum_measure : ndarray
        Measure of ``{|f| >= level}`` for each level, i.e. ``f*`` equals
        ``levels[k]`` on ``[cum_measure[k-1], cum_measure[k])``.
    """
    a = np.abs(np.asarray(values)).ravel()
    m = np.asarray(measure, dtype=float).ravel()
    order = np.argsort(-a, kind="stable")
    return a[order], np.cumsum(m[order])


def lorentz_from_samples(values, measure, p: float, d: float, warn: bool = True) -> float:
    """Lorentz quasi-norm of the step rearrangement of weighted samples."""
    levels, cum = rearrangement(values, measure)
    if warn and np.unique(levels).size < 64:
        warnings.warn("distribution function has fewer than 64 distinct levels; "
                      "the Lorentz norm is poorly resolved", RuntimeWarning, stacklevel=3)
    if levels.size == 0 or levels[0] == 0:
        return 0.0
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    if math.isinf(d):
        return float(np.max(levels * cum ** inv_p))
    prev = np.concatenate([[0.0], cum[:-1]])
    if inv_p == 0:
        raise ValueError("p = inf needs d = inf")
    e = d * inv_p
    pieces = levels ** d * (cum ** e - prev ** e) / e
    return float(np.sum(pieces) ** (1.0 / d))


def lorentz_norm_rearranged(f: RadialFunction, lp: LorentzParams) -> NormResult:
    """Lorentz norm via the decreasing rearrangement on the grid measure.

    Warns
    -----
    RuntimeWarning
        If the samples take fewer than 64 distinct values.
    """
    val = lorentz_from_samples(f.values, f.grid.measure, lp.p, lp.d)
    return NormResult(val, "rearrangement")


def holder_check(f: RadialFunction, g: RadialFunction, p1: float, d1: float,
                 p2: float, d2: float, d3: float | None = None) -> dict:
    """Compare ``||f g||_{(p3,d3)}`` with ``||f||_{(p1,d1)} ||g||_{(p2,d2)}``.

    ``1/p3 = 1/p1 + 1/p2``; ``d3`` defaults to ``1/d3 = 1/d1 + 1/d2``
    capped below at 1.

    Raises
    ------
    ExponentError
        If ``p3 <= 1`` or ``1/d1 + 1/d2 < 1/d3``.
    """
    inv3 = 1.0 / p1 + 1.0 / p2
    if inv3 >= 1.0:
        raise ExponentError(f"1/p1 + 1/p2 = {inv3:g} leaves p3 <= 1")
    p3 = 1.0 / inv3
    dsum = 1.0 / d1 + 1.0 / d2
    if d3 is None:
        d3 = max(1.0, 1.0 / dsum) if dsum > 0 else math.inf
    if dsum < 1.0 / d3 - 1e-15:
        raise ExponentError("need 1/d1 + 1/d2 >= 1/d3")
    if f.grid is not g.grid:
        raise ValueError("f and g must share a grid")
    meas = f.grid.measure
    lhs = lorentz_from_samples(np.asarray(f.values) * np.asarray(g.values), meas, p3, d3,
                               warn=False)
    nf = lorentz_from_samples(f.values, meas, p1, d1, warn=False)
    ng = lorentz_from_samples(g.values, meas, p2, d2, warn=False)
    rhs = nf * ng
    return {"p3": p3, "d3": d3, "lhs": lhs, "rhs": rhs,
            "ratio": lhs / rhs if rhs > 0 else 0.0}
