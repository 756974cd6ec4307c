"""
Dispersion phase, the regularized kernel and oscillatory-integral bounds.

The phase is ``psi(lam) = sqrt(T (T + 1))`` with ``T = lam^2 + rho^2``, the
symbol of ``P = sqrt(-Delta (1 - Delta))``.  The radial kernel of
``exp(-itP)`` is

    I_eps(t, r) = int_R exp(-i t psi(lam) - eps^2 lam^2) Phi_lam(r) D(lam) dlam

with ``D`` the Plancherel density, and ``I = lim I_eps``.

The integrand is entire in ``lam`` apart from branch points and poles on
the imaginary axis, so the half-line integral may be taken along the ray
``lam = s exp(-i theta sign(t))`` for ``0 <= theta < pi/4``.  On that ray
``exp(-itpsi)`` decays like a Gaussian, which makes large ``|t|`` cheap and
``eps -> 0`` harmless.  ``theta = 0`` is the ordinary real-axis
computation, where only ``eps`` provides decay.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import make_interp_spline

from .quadrature import gk15_panels
from .specfun import GeometryParams, SphericalEvaluator, plancherel_density

_LOG_CUT = math.log(1e-16)


# ---------------------------------------------------------------------------
# Phase
# ---------------------------------------------------------------------------

def _t_of(lam, geometry):
    lam = np.asarray(lam)
    return lam * lam + geometry.rho ** 2


def psi(lam, geometry: GeometryParams):
    """``sqrt((lam^2 + rho^2)(lam^2 + rho^2 + 1))``; complex input allowed."""
    T = _t_of(lam, geometry)
    if np.iscomplexobj(T):
        return np.sqrt(T) * np.sqrt(T + 1.0)
    return np.sqrt(T * (T + 1.0))


def dpsi(lam, geometry: GeometryParams):
    """First derivative ``(2T + 1) lam / psi``."""
    lam = np.asarray(lam)
    T = _t_of(lam, geometry)
    return (2.0 * T + 1.0) * lam / psi(lam, geometry)


def d2psi(lam, geometry: GeometryParams):
    """Second derivative ``((2T + 1)(T^2 + T) - lam^2) / (T^2 + T)^{3/2}``.

    Always larger than 1 on the real line.
    """
    lam = np.asarray(lam)
    T = _t_of(lam, geometry)
    q = T * T + T
    return ((2.0 * T + 1.0) * q - lam * lam) / (q * np.sqrt(q))


def xi_abs(lam, geometry: GeometryParams):
    """``|xi| = sqrt(lam^2 + rho^2)``."""
    return np.sqrt(_t_of(lam, geometry))


def xi_bracket(lam, geometry: GeometryParams):
    """``<xi> = sqrt(1 + lam^2 + rho^2)``."""
    return np.sqrt(1.0 + _t_of(lam, geometry))


@dataclass(frozen=True)
class Phase:
    """Phase function bound to a geometry."""

    geometry: GeometryParams

    def __call__(self, lam):
        return psi(lam, self.geometry)

    def d1(self, lam):
        return dpsi(lam, self.geometry)

    def d2(self, lam):
        return d2psi(lam, self.geometry)


# ---------------------------------------------------------------------------
# Regularized kernel
# ---------------------------------------------------------------------------

class KernelConvergenceError(RuntimeError):
    """Richardson extrapolation in eps did not settle."""

    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class QuadratureBudget:
    """Panel budget and accuracy target for the kernel integrals.

    Attributes
    ----------
    max_panels : int
        Upper bound on Gauss-Kronrod panels for one integral.
    tol : float
        Target accuracy (relative) used by callers that iterate.
    phase_step : float
        Largest phase increment allowed across a panel.
    """

    max_panels: int = 400_000
    tol: float = 1e-8
    phase_step: float = math.pi / 4

    def __post_init__(self):
        if self.max_panels <= 0:
            raise ValueError("panel budget must be positive")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")

    def doubled(self) -> "QuadratureBudget":
        """Twice the panels per unit phase and twice the panel cap."""
        return QuadratureBudget(2 * self.max_panels, self.tol, 0.5 * self.phase_step)


@dataclass(frozen=True)
class KernelRequest:
    """One evaluation of ``I_eps(t, r)``."""

    t: float
    r: float
    epsilon: float
    geometry: GeometryParams
    quadrature: QuadratureBudget = field(default_factory=QuadratureBudget)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.r < 0:
            raise ValueError("radius must be non-negative")
        if not math.isfinite(self.t):
            raise ValueError("time must be finite")


@dataclass(frozen=True)
class KernelResult:
    """Value of a kernel integral with its error estimate.

    Attributes
    ----------
    value : complex or ndarray
    est_error : float or ndarray
    panels_used : int
    converged : bool
        False when the panel budget was exhausted.
    angle : float
        Contour rotation used.
    trace : tuple
        Richardson history ``(eps, value)`` for extrapolated results.
    """

    value: complex
    est_error: float
    panels_used: int
    converged: bool = True
    angle: float = 0.0
    trace: tuple = ()


def _log_envelope(s, t, eps, r_max, angle, geometry):
    """Log of an upper bound of the integrand modulus along the ray."""
    lam = s * np.exp(-1j * angle * np.sign(t))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = (-1j * t * psi(lam, geometry) - eps * eps * lam * lam).real
        dens = np.abs(plancherel_density(lam, geometry))
        out = expo + np.log(dens) + s * math.sin(angle) * r_max
    return np.where(s == 0, -np.inf, out)


def _cutoff(t, eps, r_max, angle, geometry):
    """Smallest ``S`` beyond which the envelope stays below 1e-16 of its peak."""
    hi = 4.0
    while True:
        s = np.linspace(0.0, hi, 2001)
        env = _log_envelope(s, t, eps, r_max, angle, geometry)
        peak = np.max(env)
        above = np.flatnonzero(env > peak + _LOG_CUT)
        if above[-1] < s.size - 50:
            return float(s[min(above[-1] + 1, s.size - 1)])
        if hi > 1e7:
            raise ValueError("integrand does not decay: need eps > 0 or a rotated contour")
        hi *= 4.0


def _phase_count(s, t, eps, r_max, geometry, step):
    """Monotone count of phase increments used to place panel edges."""
    return (abs(t) * (psi(s, geometry) - psi(0.0, geometry))
            + eps * eps * s * s + (r_max + 1.0) * s) / step


def _panel_count(t, eps, r_max, angle, geometry, step):
    S = _cutoff(t, eps, r_max, angle, geometry)
    return S, max(1, int(math.ceil(_phase_count(S, t, eps, r_max, geometry, step))))


def auto_angle(t, r_max):
    """Rotation keeping the growth of ``Phi`` along the ray below ``e^2``."""
    if t == 0:
        return 0.0
    return min(math.pi / 8, math.atan(16.0 * abs(t) / max(r_max, 1.0) ** 2))


def _choose_contour(t, eps, r_max, geometry, step, angle):
    if angle != "auto":
        a = float(angle)
        if not 0 <= a < math.pi / 4:
            raise ValueError("contour angle must lie in [0, pi/4)")
        S, P = _panel_count(t, eps, r_max, a, geometry, step)
        return a, S, P
    cands = []
    a_rot = auto_angle(t, r_max)
    for a in (a_rot, 0.5 * a_rot, 0.0):
        if a == 0.0 and eps == 0:
            continue
        if a > 0 or eps > 0:
            S, P = _panel_count(t, eps, r_max, a, geometry, step)
            cands.append((P, -a, S))
    P, neg_a, S = min(cands)
    return -neg_a, S, P


def kernel_eps_profile(t, r, epsilon, geometry: GeometryParams, *,
                       budget: QuadratureBudget | None = None, angle="auto",
                       evaluator: SphericalEvaluator | None = None,
                       chunk_elems: int = 2_000_000) -> KernelResult:
    """``I_eps(t, r)`` for an array of radii sharing one contour and panel set.

    Parameters
    ----------
    t : float
    r : array_like
        Radii, ``r >= 0``.
    epsilon : float
        Regularization, ``>= 0``.  Zero needs a rotated contour.
    geometry : GeometryParams
    budget : QuadratureBudget, optional
    angle : float or "auto"
        Contour rotation in ``[0, pi/4)``.
    evaluator : SphericalEvaluator, optional

    Returns
    -------
    KernelResult
        Arrays in ``value`` and ``est_error``.
    """
    budget = budget or QuadratureBudget()
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("radii must be finite and non-negative")
    if t == 0:
        raise ValueError("t = 0 is the delta distribution, not a function")
    ev = evaluator or SphericalEvaluator(geometry)
    r_max = float(np.max(r)) if r.size else 0.0
    a, S, P = _choose_contour(t, epsilon, r_max, geometry, budget.phase_step, angle)
    converged = P <= budget.max_panels
    P = min(P, budget.max_panels)

    # panel edges at equal phase counts
    fine = np.linspace(0.0, S, 8 * P + 257)
    count = _phase_count(fine, t, epsilon, r_max, geometry, budget.phase_step)
    edges = np.interp(np.linspace(0.0, count[-1], P + 1), count, fine)
    rot = np.exp(-1j * a * np.sign(t))

    value = np.zeros(r.size, dtype=complex)
    err = np.zeros(r.size)
    per_chunk = max(1, chunk_elems // (15 * max(r.size, 1)))
    for start in range(0, P, per_chunk):
        e = edges[start:start + per_chunk + 1]
        s, wk, wg = gk15_panels(e)
        lam = s * rot
        with np.errstate(over="ignore", invalid="ignore"):
            g = (2.0 * rot * np.exp(-1j * t * psi(lam, geometry) - epsilon ** 2 * lam * lam)
                 * plancherel_density(lam, geometry))
        if a == 0:
            lam_eval = lam.real
        else:
            lam_eval = lam
        phi = ev.matrix(lam_eval.ravel(), r).reshape(s.shape + (r.size,))
        f = g[..., None] * phi
        k = np.einsum("pq,pqr->pr", wk, f)
        gg = np.einsum("pq,pqr->pr", wg, f)
        value += k.sum(axis=0)
        err += np.abs(k - gg).sum(axis=0)
    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(err))):
        raise FloatingPointError("kernel quadrature produced non-finite values")
    return KernelResult(value, err, P, converged, a)


def kernel_I_eps(req: KernelRequest, *, angle="auto",
                 evaluator: SphericalEvaluator | None = None) -> KernelResult:
    """Regularized kernel ``I_eps(t, r)`` for one request."""
    res = kernel_eps_profile(req.t, [req.r], req.epsilon, req.geometry,
                             budget=req.quadrature, angle=angle, evaluator=evaluator)
    return KernelResult(complex(res.value[0]), float(res.est_error[0]), res.panels_used,
                        res.converged, res.angle)


def default_eps0(t: float) -> float:
    """Starting regularization: 0.1, reduced when ``eps^2`` would exceed ``|t|/4``."""
    return min(0.1, 0.5 * math.sqrt(abs(t)))


def kernel_profile(t, r, geometry: GeometryParams, tol: float = 1e-8, *,
                   eps0: float | None = None, max_levels: int = 10, atol: float = 0.0,
                   budget: QuadratureBudget | None = None, angle="auto",
                   evaluator: SphericalEvaluator | None = None) -> KernelResult:
    """Unregularized kernel ``I(t, r)`` on an array of radii.

    ``I_eps`` is evaluated at ``eps_k = eps0 2^-k`` and extrapolated in
    ``eps^2`` (Richardson table) until two successive diagonal entries
    agree to ``tol`` relative (``atol`` absolute) at every radius.

    Raises
    ------
    KernelConvergenceError
        After ``max_levels`` levels without agreement.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    eps0 = default_eps0(t) if eps0 is None else float(eps0)
    rows = []
    trace = []
    panels = 0
    prev_diag = None
    conv_flag = True
    for k in range(max_levels):
        eps = eps0 * 2.0 ** (-k)
        res = kernel_eps_profile(t, r, eps, geometry, budget=budget, angle=angle,
                                 evaluator=evaluator)
        panels += res.panels_used
        conv_flag &= res.converged
        row = [res.value]
        for j in range(1, k + 1):
            fac = 4.0 ** j
            row.append(row[j - 1] + (row[j - 1] - rows[-1][j - 1]) / (fac - 1.0))
        rows.append(row)
        diag = row[-1]
        trace.append((eps, diag.copy()))
        if prev_diag is not None:
            diff = np.abs(diag - prev_diag)
            if np.all(diff <= tol * np.abs(diag) + atol):
                est = diff + res.est_error
                return KernelResult(diag, est, panels, conv_flag, res.angle, tuple(trace))
        prev_diag = diag
    raise KernelConvergenceError(
        f"Richardson extrapolation in eps did not reach tol={tol:g} after "
        f"{max_levels} levels", tuple(trace))


def kernel_I(t: float, r: float, geometry: GeometryParams, tol: float = 1e-8,
             **kwargs) -> KernelResult:
    """Kernel ``I(t, r) = lim_{eps->0} I_eps(t, r)`` at one point."""
    res = kernel_profile(t, [r], geometry, tol, **kwargs)
    tr = tuple((e, complex(v[0])) for e, v in res.trace)
    return KernelResult(complex(res.value[0]), float(res.est_error[0]), res.panels_used,
                        res.converged, res.angle, tr)


def kernel_envelope(t, r, geometry: GeometryParams):
    """Pointwise bound profile ``|t|^a r^{(n+3)/4} exp(-(n-1) r / 2)``.

    ``a = -3/2`` for ``|t| >= 1`` and ``-n/2`` below.
    """
    n = geometry.n
    a = -1.5 if abs(t) >= 1 else -0.5 * n
    r = np.asarray(r, dtype=float)
    return abs(t) ** a * r ** (0.25 * (n + 3)) * np.exp(-0.5 * (n - 1) * r)


def kernel_bound_check(t_values, r_values, geometry: GeometryParams, *, tol: float = 1e-7,
                       budget: QuadratureBudget | None = None, epsilon=None,
                       evaluator=None, map_fn=map) -> dict:
    """Fitted constant ``C-hat = sup |I| / envelope`` and its budget stability.

    Parameters
    ----------
    epsilon : float, optional
        Use ``I_eps`` at this regularization instead of the limit.
    map_fn : callable
        ``map``-like function used over the time values (for thread pools).

    Returns
    -------
    dict
        ``c_hat``, ``c_hat_doubled``, ``relative_change`` and the ratio table.
    """
    budget = budget or QuadratureBudget()
    r_values = np.asarray(r_values, dtype=float)

    def one(args):
        t, bud = args
        if epsilon is None:
            res = kernel_profile(t, r_values, geometry, tol, budget=bud, evaluator=evaluator)
        else:
            res = kernel_eps_profile(t, r_values, epsilon, geometry, budget=bud,
                                     evaluator=evaluator)
        return np.abs(res.value) / kernel_envelope(t, r_values, geometry)

    ratios = np.array(list(map_fn(one, [(t, budget) for t in t_values])))
    ratios2 = np.array(list(map_fn(one, [(t, budget.doubled()) for t in t_values])))
    c1, c2 = float(np.max(ratios)), float(np.max(ratios2))
    return {
        "c_hat": c1,
        "c_hat_doubled": c2,
        "relative_change": abs(c2 - c1) / c1,
        "ratios": ratios,
        "t": np.asarray(t_values, dtype=float),
        "r": r_values,
    }


# ---------------------------------------------------------------------------
# Oscillatory integral bounds
# ---------------------------------------------------------------------------

def oscillatory_integral(amplitude, a, b, t, r, geometry: GeometryParams, sign=1,
                         step: float = math.pi / 8):
    """``int_a^b exp(i(-t psi(lam) + sign r lam)) m(lam) dlam`` on GK15 panels."""
    def count(x):
        return (abs(t) * np.abs(psi(x, geometry) - psi(a, geometry))
                + abs(r) * np.abs(x - a) + 8.0 * np.abs(x - a)) / step

    fine = np.linspace(a, b, 20001)
    cnt = count(fine)
    P = max(4, int(math.ceil(cnt[-1])))
    edges = np.interp(np.linspace(0.0, cnt[-1], P + 1), cnt, fine)
    s, wk, _ = gk15_panels(edges)
    f = np.exp(1j * (-t * psi(s, geometry) + sign * r * s)) * amplitude(s)
    return complex(np.sum(wk * f))


def _derivative_integrals(amplitude, pieces, k, n_grid=20001):
    """``int |d^j m|`` for ``j = 0..k`` by repeated differentiation of a spline."""
    totals = np.zeros(k + 1)
    for lo, hi in pieces:
        x = np.linspace(lo, hi, n_grid)
        spl = make_interp_spline(x, amplitude(x), k=7)
        xf = np.linspace(lo, hi, 4 * n_grid)
        for j in range(k + 1):
            d = spl.derivative(j)(xf) if j else spl(xf)
            totals[j] += trapezoid(np.abs(d), xf)
    return totals


def smooth_bump(a: float, b: float):
    """``C^inf`` bump ``exp(-1/((x-a)(b-x)) * (b-a)^2/4 + 1)``-type, peak value 1."""
    mid2 = 0.25 * (b - a) ** 2

    def m(x):
        x = np.asarray(x, dtype=float)
        q = (x - a) * (b - x)
        out = np.zeros_like(x)
        inside = q > 0
        out[inside] = np.exp(1.0 - mid2 / q[inside])
        return out
    return m


def vdc_bound_check(amplitude, support, t_values, r: float, geometry: GeometryParams,
                    sign: int = 1) -> dict:
    """Van der Corput ratio ``|int e^{i(-t psi +- r lam)} m| / (|t|^{-1/2} int |m'|)``.

    Parameters
    ----------
    amplitude : callable
        Vectorized amplitude, zero outside ``support``.
    support : (float, float)
    t_values : sequence of nonzero floats
    r : float

    Returns
    -------
    dict
        Per-``t`` left side, right side and ratio plus ``max_ratio``.
    """
    a, b = support
    var = _derivative_integrals(amplitude, [(a, b)], 1)[1]
    rows = []
    for t in t_values:
        if t == 0:
            raise ValueError("t must be nonzero")
        lhs = abs(oscillatory_integral(amplitude, a, b, t, r, geometry, sign))
        rhs = abs(t) ** -0.5 * var
        rows.append((float(t), lhs, rhs, lhs / rhs if rhs > 0 else 0.0))
    ratios = [row[3] for row in rows]
    return {"rows": rows, "max_ratio": max(ratios), "ratios": ratios}


class CriticalPointError(ValueError):
    """The phase has a stationary point inside the amplitude support."""


def nonstationary_bound_check(amplitude, t: float, r: float, k: int,
                              geometry: GeometryParams, sign: int = 1) -> dict:
    """Ratio of the oscillatory integral to ``(1+D)^{-k} sum_j int |d^j m|``.

    The amplitude lives on ``[-2, -1/2] U [1/2, 2]`` and
    ``D = min |-t psi'(lam) +- r|`` over that set.

    Raises
    ------
    CriticalPointError
        If the phase derivative changes sign on the support.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    pieces = [(-2.0, -0.5), (0.5, 2.0)]
    dmin = np.inf
    for lo, hi in pieces:
        x = np.linspace(lo, hi, 4001)
        d = -t * dpsi(x, geometry) + sign * r
        if np.any(np.sign(d[:-1]) * np.sign(d[1:]) <= 0):
            raise CriticalPointError(
                f"phase derivative vanishes on [{lo}, {hi}] for t={t}, r={r}")
        dmin = min(dmin, float(np.min(np.abs(d))))
    lhs = abs(sum(oscillatory_integral(amplitude, lo, hi, t, r, geometry, sign)
                  for lo, hi in pieces))
    sums = _derivative_integrals(amplitude, pieces, k)
    rhs = (1.0 + dmin) ** (-k) * float(np.sum(sums))
    return {"t": t, "r": r, "k": k, "D": dmin, "lhs": lhs, "rhs": rhs,
            "ratio": lhs / rhs if rhs > 0 else 0.0}
