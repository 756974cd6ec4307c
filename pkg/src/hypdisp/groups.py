"""
Spectral multipliers: the group ``exp(-itP)``, the linear Boussinesq
propagator ``G(t)`` and the auxiliary operators ``Lambda^s``, ``J^s``, ``Q``.

States of the linear Boussinesq system are kept as pairs ``(u_hat, w_hat)``
with ``w = Lambda J^{-1} v``.  In these coordinates ``G(t)`` acts at each
spectral node as the rotation by the angle ``t psi(lam)``.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .lorentz import NormResult, lorentz_from_samples, lq_norm_radial
from .oscillatory import kernel_profile, psi, xi_abs, xi_bracket
from .quadrature import loglog_slope
from .transform import (GridMismatchError, SpectralFunction, TransformPlan,
                        forward_values, inverse_values)

SYMBOL_KINDS = ("cos_tpsi", "sin_tpsi_g2", "sin_tpsi_g3", "exp_minus_itpsi",
                "lambda_power", "j_power", "q_ratio")


@dataclass(frozen=True)
class MultiplierSymbol:
    """A spectral multiplier.

    Parameters
    ----------
    kind : str
        One of ``cos_tpsi`` (``cos t psi``), ``sin_tpsi_g2``
        (``-|xi|/<xi> sin t psi``), ``sin_tpsi_g3`` (``<xi>/|xi| sin t psi``),
        ``exp_minus_itpsi``, ``lambda_power`` (``|xi|^s``), ``j_power``
        (``<xi>^s``) and ``q_ratio`` (``|xi|/<xi>``).
    param : float
        Time ``t`` or power ``s``; ignored by ``q_ratio``.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in SYMBOL_KINDS:
            raise ValueError(f"unknown multiplier {self.kind!r}")

    def __call__(self, lam, geometry):
        k, a = self.kind, self.param
        if k == "cos_tpsi":
            return np.cos(a * psi(lam, geometry))
        if k == "sin_tpsi_g2":
            return -xi_abs(lam, geometry) / xi_bracket(lam, geometry) * np.sin(a * psi(lam, geometry))
        if k == "sin_tpsi_g3":
            return xi_bracket(lam, geometry) / xi_abs(lam, geometry) * np.sin(a * psi(lam, geometry))
        if k == "exp_minus_itpsi":
            return np.exp(-1j * a * psi(lam, geometry))
        if k == "lambda_power":
            return xi_abs(lam, geometry) ** a
        if k == "j_power":
            return xi_bracket(lam, geometry) ** a
        return xi_abs(lam, geometry) / xi_bracket(lam, geometry)


def apply_multiplier(sym: MultiplierSymbol, f_hat: SpectralFunction) -> SpectralFunction:
    """Pointwise product with a symbol on the spectral grid."""
    grid = f_hat.grid
    return SpectralFunction(grid, sym(grid.nodes, grid.geometry) * f_hat.values)


def apply_prototype_group(z_hat: SpectralFunction, t: float) -> SpectralFunction:
    """``exp(-itP) z``: multiply by ``exp(-i t psi)``."""
    return apply_multiplier(MultiplierSymbol("exp_minus_itpsi", t), z_hat)


@dataclass(frozen=True, eq=False)
class PairState:
    """Spectral pair ``(u_hat, w_hat)`` with ``w = Lambda J^{-1} v``."""

    u_hat: SpectralFunction
    w_hat: SpectralFunction

    def __post_init__(self):
        if self.u_hat.grid is not self.w_hat.grid:
            raise GridMismatchError("pair components live on different grids")
        for comp in (self.u_hat.values, self.w_hat.values):
            if not np.all(np.isfinite(comp)):
                raise ValueError("state has non-finite entries")

    @property
    def grid(self):
        return self.u_hat.grid

    @classmethod
    def from_arrays(cls, grid, u, w) -> "PairState":
        return cls(SpectralFunction(grid, np.asarray(u)), SpectralFunction(grid, np.asarray(w)))

    @classmethod
    def from_uv(cls, u_hat: SpectralFunction, v_hat: SpectralFunction) -> "PairState":
        """Build from the transforms of ``u`` and ``v``."""
        w = apply_multiplier(MultiplierSymbol("q_ratio"), v_hat)
        return cls(u_hat, w)

    @classmethod
    def zeros(cls, grid) -> "PairState":
        z = np.zeros(grid.size)
        return cls.from_arrays(grid, z, z.copy())

    def v_hat(self) -> SpectralFunction:
        """``v_hat = <xi>/|xi| w_hat``; no division by zero since ``|xi| >= rho``."""
        g = self.grid
        return SpectralFunction(g, xi_bracket(g.nodes, g.geometry) / xi_abs(g.nodes, g.geometry)
                                * self.w_hat.values)

    def __add__(self, other: "PairState") -> "PairState":
        return PairState(self.u_hat + other.u_hat, self.w_hat + other.w_hat)

    def __sub__(self, other: "PairState") -> "PairState":
        return PairState(self.u_hat - other.u_hat, self.w_hat - other.w_hat)

    def __mul__(self, a) -> "PairState":
        return PairState(self.u_hat * a, self.w_hat * a)

    __rmul__ = __mul__


def rotate(u, w, angle):
    """Rotate the pair ``(u, w)`` by ``angle``: ``[[c, -s], [s, c]]``."""
    c, s = np.cos(angle), np.sin(angle)
    return c * u - s * w, s * u + c * w


def apply_boussinesq_group(state: PairState, t: float) -> PairState:
    """Linear Boussinesq propagator ``G(t)`` in ``(u_hat, w_hat)`` coordinates."""
    g = state.grid
    u, w = rotate(state.u_hat.values, state.w_hat.values, t * psi(g.nodes, g.geometry))
    return PairState.from_arrays(g, u, w)


def l1_operator(phi_hat: SpectralFunction, t: float) -> SpectralFunction:
    """First component of ``G(t)[phi, 0]``: the ``cos(t psi)`` multiplier."""
    return apply_multiplier(MultiplierSymbol("cos_tpsi", t), phi_hat)


def l2_operator(phi_hat: SpectralFunction, t: float) -> SpectralFunction:
    """The ``sin(t psi)`` multiplier."""
    g = phi_hat.grid
    return SpectralFunction(g, np.sin(t * psi(g.nodes, g.geometry)) * phi_hat.values)


def physical(state: PairState, plan: TransformPlan):
    """``(u, w)`` sampled on the plan's radial grid."""
    if state.grid is not plan.sgrid:
        raise GridMismatchError("state is not on this plan's spectral grid")
    uv = inverse_values(np.stack([state.u_hat.values, state.w_hat.values]), plan)
    return uv[0], uv[1]


def x_norm(state: PairState, p: float, d: float, plan: TransformPlan) -> NormResult:
    """``max(||u||_{(p,d)}, ||w||_{(p,d)})`` via the rearrangement route."""
    u, w = physical(state, plan)
    meas = plan.rgrid.measure
    nu = lorentz_from_samples(np.real(u), meas, p, d, warn=False)
    nw = lorentz_from_samples(np.real(w), meas, p, d, warn=False)
    return NormResult(max(nu, nw), "rearrangement", details={"u": nu, "w": nw})


# ---------------------------------------------------------------------------
# dispersive scans
# ---------------------------------------------------------------------------

def conjugate_exponent(q: float) -> float:
    return 1.0 if math.isinf(q) else q / (q - 1.0)


def group_ratio(probe_values, t, q, plan: TransformPlan, d=None) -> float:
    """``||exp(-itP) g||_{(q,d)} / ||g||_{(q',d)}`` on the plan grid (``d = q`` by default)."""
    meas = plan.rgrid.measure
    qc = conjugate_exponent(q)
    dd = q if d is None else d
    dd_in = qc if d is None else d
    ghat = forward_values(probe_values, plan, warn=False)
    out = inverse_values(np.exp(-1j * t * psi(plan.sgrid.nodes, plan.geometry)) * ghat, plan)
    num = lorentz_from_samples(out, meas, q, dd, warn=False)
    den = lorentz_from_samples(probe_values, meas, qc, dd_in, warn=False)
    return num / den


def x_ratio(probe_values, t, q, plan: TransformPlan) -> float:
    """``||G(t)[g, g]||_{X(q,inf)} / ||g||_{(q',inf)}`` (both components equal)."""
    meas = plan.rgrid.measure
    ghat = forward_values(probe_values, plan, warn=False)
    st = apply_boussinesq_group(PairState.from_arrays(plan.sgrid, ghat, ghat.copy()), t)
    num = x_norm(st, q, math.inf, plan).value
    den = lorentz_from_samples(probe_values, meas, conjugate_exponent(q), math.inf, warn=False)
    return num / den


def default_probes(r):
    """Three smooth decaying bumps used for operator-norm lower bounds."""
    r = np.asarray(r)
    return [np.exp(-r ** 2 / 2.0), np.exp(-r ** 2 / 4.5), (1.0 + r ** 2) * np.exp(-r ** 2 / 2.0)]


def dispersive_scan(q: float, t_values, plan: TransformPlan, probes=None, *,
                    kernel: bool = True, kernel_r_max: float = 30.0, kernel_tol: float = 1e-8,
                    map_fn=map) -> dict:
    """Decay table of the kernel and probe ratios.

    For each ``t``: the two-piece ``L^q`` norm of ``I(t, .)``, the largest
    ``L^{q'} -> L^q`` probe ratio of ``exp(-itP)`` and the largest
    ``X(q, inf)`` probe ratio of ``G(t)``.  Log-log slopes of each column
    are fitted over the whole sweep.

    Parameters
    ----------
    q : float
        ``q > 2``.
    t_values : sequence of float
    plan : TransformPlan
        Must resolve ``exp(-itpsi)`` for the largest ``|t|`` in the sweep.
    probes : list of array_like, optional
        Samples on ``plan.rgrid``; defaults to :func:`default_probes`.
    kernel : bool
        Also compute the kernel norms.
    """
    if not q > 2:
        raise ValueError("need q > 2")
    t_values = np.asarray(t_values, dtype=float)
    if t_values.size == 0:
        raise ValueError("empty sweep")
    if probes is None:
        probes = default_probes(plan.rgrid.nodes)
    geometry = plan.geometry

    def row(t):
        out = {"t": float(t)}
        if kernel:
            prof = lambda r: np.abs(kernel_profile(t, r, geometry, kernel_tol).value)
            out["kernel_norm"] = lq_norm_radial(prof, q, geometry, kernel_r_max).value
        out["group_ratio"] = max(group_ratio(p, t, q, plan) for p in probes)
        out["x_ratio"] = max(x_ratio(p, t, q, plan) for p in probes)
        return out

    rows = list(map_fn(row, t_values))
    slopes = {}
    if t_values.size >= 2:
        for key in rows[0]:
            if key != "t":
                slopes[key] = loglog_slope(np.abs(t_values), [rw[key] for rw in rows])
    return {"q": q, "rows": rows, "slopes": slopes}


def small_time_ratio(t: float, q: float, plan: TransformPlan, widths=None) -> dict:
    """Lower bound of the ``L^{q'} -> L^q`` norm of ``exp(-itP)`` at small ``|t|``.

    Gaussian probes ``exp(-r^2 / (2 sigma^2))`` with ``sigma = c sqrt(2|t|)``
    over a geometric range of ``c``; the dispersive length scale shrinks
    with ``t``, so the probe family has to shrink with it.
    """
    widths = np.geomspace(0.35, 3.0, 13) if widths is None else np.asarray(widths)
    r = plan.rgrid.nodes
    best, best_c = 0.0, None
    for c in widths:
        sigma = c * math.sqrt(2.0 * abs(t))
        ratio = group_ratio(np.exp(-r ** 2 / (2 * sigma ** 2)), t, q, plan)
        if ratio > best:
            best, best_c = ratio, c
    return {"t": t, "ratio": best, "c": best_c}


def small_time_scan(q: float, t_values, plan: TransformPlan, widths=None, map_fn=map) -> dict:
    """Sweep of :func:`small_time_ratio` with fitted log-log slope."""
    rows = list(map_fn(lambda t: small_time_ratio(t, q, plan, widths), t_values))
    slope = loglog_slope(np.abs(t_values), [rw["ratio"] for rw in rows])
    return {"q": q, "rows": rows, "slope": slope,
            "expected": -0.5 * plan.geometry.n * (1.0 - 2.0 / q)}
