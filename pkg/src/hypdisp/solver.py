"""
Mild solutions of the generalized Boussinesq equation with radial data.

The state is carried spectrally as ``z = (u_hat, w_hat)`` with
``w = Lambda J^{-1} v`` (see :mod:`hypdisp.groups`), so the linear flow is a
rotation by ``t psi(lam)`` at every spectral node and the integral equation
reads

    z(t) = R(t psi) (z0 - C(t)),   C(t) = int_0^t R(-s psi) [0, Q f(u(s))^] ds.

``C`` is accumulated panel by panel on a graded time mesh; inside a panel
the running integral comes from a Legendre integration matrix, so one
Picard sweep costs one forward and one inverse transform per time node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import integrate

from .groups import PairState, apply_boussinesq_group, rotate
from .lorentz import lorentz_from_samples
from .oscillatory import psi, xi_abs, xi_bracket
from .quadrature import gauss_legendre, integration_matrix, loglog_slope
from .specfun import GeometryParams, gamma_complex
from .transform import (GridMismatchError, RadialFunction, RadialGrid, TransformPlan,
                        forward_values, inverse_values, make_plan)


class ModeError(ValueError):
    """The power ``b`` lies outside every admissible range."""


class SmallnessError(ValueError):
    """Data too large for the requested global construction."""


class NonContractionError(RuntimeError):
    """Picard iterates stopped contracting."""

    def __init__(self, msg, ratio, history):
        super().__init__(msg)
        self.ratio = ratio
        self.history = history


class ConstraintError(ValueError):
    """Rough-data parameters violate their exponent constraints."""


# ---------------------------------------------------------------------------
# exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Exponents:
    beta: float
    alpha1: float
    b0: float
    b1: float
    mode: str


def critical_power(n: int) -> float:
    """Positive root of ``n b^2 - (n + 2) b - 2 = 0``."""
    return (n + 2 + math.sqrt(n * n + 12 * n + 4)) / (2 * n)


def upper_power(n: int) -> float:
    return math.inf if n == 2 else (n + 2) / (n - 2)


def exponents(b: float, n: int) -> Exponents:
    """Time-weight exponents and the admissible range of ``b``.

    ``mode`` is ``"local"`` for ``1 < b < b0``, ``"global"`` for
    ``b0 < b < b1`` and ``"critical"`` at ``b = b0`` (both weights are
    defined there, neither construction applies).

    Raises
    ------
    ModeError
        For ``b <= 1`` or ``b >= b1``.
    """
    if n < 2:
        raise ValueError("n >= 2 required")
    b0, b1 = critical_power(n), upper_power(n)
    if not b > 1 or not b < b1:
        raise ModeError(f"b = {b} outside (1, {b1}) for n = {n}")
    beta = n * (b - 1) / (2 * (b + 1))
    alpha1 = 1 / (b - 1) - n / (2 * (b + 1))
    if abs(b - b0) <= 1e-12 * b0:
        mode = "critical"
    else:
        mode = "local" if b < b0 else "global"
    return Exponents(beta, alpha1, b0, b1, mode)


def nonlinearity(u, b: float):
    """``|u|^{b-1} u``; accepts arrays or :class:`RadialFunction`."""
    if not b > 1:
        raise ValueError("b > 1 required")
    if isinstance(u, RadialFunction):
        return RadialFunction(u.grid, nonlinearity(u.values, b))
    u = np.asarray(u)
    return np.abs(u) ** (b - 1) * u


def lipschitz_constant(b: float, n_pairs: int = 10_000, bound: float = 5.0, seed: int = 0) -> float:
    """Fitted ``C_f`` in ``|f(a1) - f(a2)| <= C_f (|a1|^{b-1} + |a2|^{b-1}) |a1 - a2|``."""
    rng = np.random.default_rng(seed)
    a1, a2 = rng.uniform(-bound, bound, (2, n_pairs))
    num = np.abs(nonlinearity(a1, b) - nonlinearity(a2, b))
    den = (np.abs(a1) ** (b - 1) + np.abs(a2) ** (b - 1)) * np.abs(a1 - a2)
    ok = den > 0
    return float(np.max(num[ok] / den[ok]))


# ---------------------------------------------------------------------------
# parameters and time mesh
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeMesh:
    """Graded panels on ``[0, T]`` with Gauss nodes.

    Panel edges are the dyadic points ``T 2^{-k}`` down to
    ``2^{-dyadic_levels}``, refined by the integers up to ``T``.  Every
    positive edge is an output time.
    """

    T: float
    order: int = 24
    dyadic_levels: int = 16

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.order < 2:
            raise ValueError("order >= 2 required")

    @property
    def edges(self) -> np.ndarray:
        pts = {float(self.T)}
        k = 0
        while self.T * 2.0 ** (-k) >= 2.0 ** (-self.dyadic_levels):
            pts.add(self.T * 2.0 ** (-k))
            k += 1
        pts.update(float(j) for j in range(1, int(math.floor(self.T)) + 1))
        return np.array([0.0] + sorted(pts))

    @property
    def output_times(self) -> np.ndarray:
        return self.edges[1:]

    def nodes(self, order=None):
        """Gauss nodes and weights, shape ``(n_panels, order)``."""
        m = order or self.order
        x, w = gauss_legendre(m)
        e = self.edges
        half = 0.5 * np.diff(e)[:, None]
        return e[:-1, None] + half * (1 + x), half * w

    def dyadic_times(self) -> np.ndarray:
        """``1, 2, 4, ...`` up to ``T``."""
        k = np.arange(0, int(math.floor(math.log2(self.T))) + 1)
        return 2.0 ** k


@dataclass(frozen=True)
class SolverParams:
    """Exponents, horizon and tolerances of one solver run.

    Parameters
    ----------
    geometry : GeometryParams
    b : float
        Power of the nonlinearity.
    alpha2 : float
        Large-time weight, ``0 <= alpha2 <= 3/2``.
    h : float
        Extra decay used by the stability and scattering statements.
    T : float
        Horizon; the mesh covers ``[-T, T]``.
    epsilon : float
        Upper bound accepted for the data norm in global mode.
    picard_tol : float
        Stop when successive iterates differ by less than
        ``picard_tol`` times the data norm.
    d : float
        Second Lorentz index of the ``X`` norms.
    """

    geometry: GeometryParams
    b: float
    alpha2: float = 1.0
    h: float = 0.0
    T: float = 256.0
    epsilon: float = 0.1
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    d: float = math.inf
    order: int = 24
    dyadic_levels: int = 16

    def __post_init__(self):
        ex = self.exponents
        if not 0 <= self.alpha2 <= 1.5:
            raise ValueError("alpha2 must lie in [0, 3/2]")
        if self.h < 0:
            raise ValueError("h >= 0 required")
        if ex.mode == "global":
            if not ex.alpha1 * self.b + self.h < 1:
                raise ModeError("alpha1 b + h < 1 fails")
            if self.alpha2 + self.h > 1.5:
                raise ModeError("alpha2 + h <= 3/2 fails")

    @property
    def exponents(self) -> Exponents:
        return exponents(self.b, self.geometry.n)

    @property
    def beta(self) -> float:
        return self.exponents.beta

    @property
    def alpha1(self) -> float:
        return self.exponents.alpha1

    @property
    def p(self) -> float:
        return self.b + 1.0

    @property
    def mesh(self) -> TimeMesh:
        return TimeMesh(self.T, self.order, self.dyadic_levels)


def default_solver_plan(geometry: GeometryParams, r_max: float = 20.0, n_r: int = 512,
                        lam_segments=((3.0, 2048), (6.0, 1024), (12.0, 1024))) -> TransformPlan:
    """Plan whose spectral nodes resolve ``exp(i t psi)`` up to ``t ~ 256``."""
    return make_plan(geometry, r_max=r_max, n_r=n_r, lam_segments=list(lam_segments))


# ---------------------------------------------------------------------------
# trajectory
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Operators:
    fwd: np.ndarray     # (n_r, n_lam)
    inv: np.ndarray     # (n_lam, n_r)
    psi: np.ndarray
    q: np.ndarray

    @classmethod
    def of(cls, plan: TransformPlan):
        g = plan.geometry
        lam = plan.sgrid.nodes
        fwd = g.sphere_area * (plan.rgrid.weights[:, None] * plan.phi.T)
        inv = plan.inverse_calibration * (plan.sgrid.weights[:, None] * plan.phi)
        return cls(fwd, inv, psi(lam, g), xi_abs(lam, g) / xi_bracket(lam, g))


@dataclass
class _Branch:
    """One time direction, stored in the forward-in-time frame."""

    z0: np.ndarray              # (2, n_lam)
    u_nodes: np.ndarray         # (n_panels, m, n_r)
    states: np.ndarray          # (n_out, 2, n_lam) at the output times
    increments: np.ndarray      # (n_panels, 2, n_lam) panel contributions to C


@dataclass
class Trajectory:
    """Picard fixed point on ``[-T, T]``.

    Attributes
    ----------
    times : ndarray
        Output times, both signs, increasing, without ``0``.
    states : list of PairState
        State at each output time.
    weighted_norm_history : list of float
        Weighted distance between successive iterates, one per iteration.
    ratios : list of float
        Successive quotients of the history.
    residual : float
        Weighted norm of ``Phi(z) - z`` for the returned ``z``, relative to
        the data norm.
    e0 : float
        Data norm (weighted norm of the linear flow).
    """

    params: SolverParams
    plan: TransformPlan
    data: PairState
    times: np.ndarray
    states: list
    weighted_norm_history: list
    ratios: list
    residual: float
    e0: float
    branches: dict = field(repr=False, default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.weighted_norm_history)

    def state_at(self, t: float) -> PairState:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12 * max(1.0, abs(t)):
            raise KeyError(f"{t} is not an output time")
        return self.states[i]

    def u_at(self, s: float) -> np.ndarray:
        """Physical ``u`` at any ``|s| <= T`` by panel-wise Lagrange interpolation."""
        if s == 0:
            return inverse_values(self.data.u_hat.values, self.plan)
        br = self.branches[1 if s > 0 else -1]
        mesh = self.params.mesh
        e = mesh.edges
        a = abs(s)
        if a > e[-1] * (1 + 1e-14):
            raise ValueError("time beyond the horizon")
        k = min(int(np.searchsorted(e, a, side="right")) - 1, e.size - 2)
        m = br.u_nodes.shape[1]
        x, _ = gauss_legendre(m)
        xs = 2 * (a - e[k]) / (e[k + 1] - e[k]) - 1
        return _lagrange_row(x, xs) @ br.u_nodes[k]


def _lagrange_row(x, xs):
    """Row of interpolation weights from nodes ``x`` to the point ``xs``."""
    diff = xs - x
    hit = np.flatnonzero(np.abs(diff) < 1e-15)
    if hit.size:
        row = np.zeros_like(x)
        row[hit[0]] = 1.0
        return row
    bw = np.array([1.0 / np.prod(x[j] - np.delete(x, j)) for j in range(x.size)])
    t = bw / diff
    return t / t.sum()


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def x_norms(states: np.ndarray, plan: TransformPlan, p: float, d: float) -> np.ndarray:
    """``X(p, d)`` norms of stacked spectral pairs, shape ``(..., 2, n_lam)``."""
    s = np.asarray(states)
    phys = inverse_values(s.reshape(-1, s.shape[-1]), plan).reshape(s.shape[:-1] + (-1,))
    meas = plan.rgrid.measure
    flat = phys.reshape(-1, 2, phys.shape[-1])
    out = np.array([max(lorentz_from_samples(row[0], meas, p, d, warn=False),
                        lorentz_from_samples(row[1], meas, p, d, warn=False)) for row in flat])
    return out.reshape(s.shape[:-2])


def _weighted(times, norms, mode, params: SolverParams) -> float:
    at = np.abs(np.asarray(times, dtype=float))
    norms = np.asarray(norms, dtype=float)
    if np.any(at == 0):
        raise ValueError("time grid must avoid t = 0")
    if mode == "local_beta_T":
        return float(np.max(at ** params.beta * norms))
    if mode != "global_alpha":
        raise ValueError(f"unknown mode {mode!r}")
    small, large = at <= 1, at >= 1
    lo = np.max(at[small] ** params.alpha1 * norms[small]) if small.any() else 0.0
    hi = np.max(at[large] ** params.alpha2 * norms[large]) if large.any() else 0.0
    return float(lo + hi)


def _default_mode(params):
    return "global_alpha" if params.exponents.mode == "global" else "local_beta_T"


def weighted_norm(traj: Trajectory, mode: str | None = None, params: SolverParams | None = None,
                  plan: TransformPlan | None = None) -> float:
    """Time-weighted sup of the ``X(b+1, d)`` norms over the output times.

    ``mode`` is ``"global_alpha"`` (``|t|^alpha1`` for ``|t| <= 1``,
    ``|t|^alpha2`` beyond, summed) or ``"local_beta_T"`` (``|t|^beta``).
    """
    params = params or traj.params
    plan = plan or traj.plan
    mode = mode or _default_mode(params)
    arr = np.stack([np.stack([s.u_hat.values, s.w_hat.values]) for s in traj.states])
    return _weighted(traj.times, x_norms(arr, plan, params.p, params.d), mode, params)


def linear_states(data: PairState, times, plan: TransformPlan) -> np.ndarray:
    """``G(t) data`` at each time, shape ``(n_t, 2, n_lam)``."""
    ang = np.asarray(times, dtype=float)[:, None] * psi(plan.sgrid.nodes, plan.geometry)
    u, w = rotate(data.u_hat.values, data.w_hat.values, ang)
    return np.stack([u, w], axis=1)


def signed_times(params: SolverParams) -> np.ndarray:
    t = params.mesh.output_times
    return np.concatenate([-t[::-1], t])


def e0_norm(data: PairState, params: SolverParams, plan: TransformPlan, mode: str | None = None) -> float:
    """Weighted norm of the free evolution ``G(t) data`` on the standard grid."""
    if data.grid is not plan.sgrid:
        raise GridMismatchError("data is not on this plan's spectral grid")
    t = signed_times(params)
    norms = x_norms(linear_states(data, t, plan), plan, params.p, params.d)
    return _weighted(t, norms, mode or _default_mode(params), params)


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

def _sweep(z0, u_prev, ops: _Operators, mesh: TimeMesh, b: float, source=None):
    """One application of the iteration map on the forward branch.

    Parameters
    ----------
    z0 : ndarray (2, n_lam)
    u_prev : ndarray (n_panels, m, n_r) or None
        Physical ``u`` of the previous iterate at the Gauss nodes; ``None``
        means the source vanishes.
    source : callable, optional
        ``source(s) -> (len(s), n_lam)`` spectral source replacing
        ``f(u)``.

    Returns
    -------
    u_nodes, states, increments
    """
    s_nodes, s_weights = mesh.nodes()
    m = s_nodes.shape[1]
    S = integration_matrix(m)
    n_out = s_nodes.shape[0]
    n_r = ops.inv.shape[1]
    u_nodes = np.empty((n_out, m, n_r))
    states = np.empty((n_out, 2, ops.psi.size))
    incs = np.zeros((n_out, 2, ops.psi.size))
    C = np.zeros((2, ops.psi.size))
    edges = mesh.edges
    for k in range(n_out):
        s = s_nodes[k]
        half = 0.5 * (edges[k + 1] - edges[k])
        ang = s[:, None] * ops.psi
        cs, sn = np.cos(ang), np.sin(ang)
        if source is not None:
            F = source(s)
        elif u_prev is not None:
            F = nonlinearity(u_prev[k], b) @ ops.fwd
        else:
            F = None
        if F is None:
            Cn = np.broadcast_to(C[:, None, :], (2, m, ops.psi.size))
        else:
            G = ops.q * F
            Ys, Yc = sn * G, cs * G
            Cn = np.stack([C[0] + half * (S @ Ys), C[1] + half * (S @ Yc)])
            incs[k, 0] = s_weights[k] @ Ys
            incs[k, 1] = s_weights[k] @ Yc
        a, bb = z0[0] - Cn[0], z0[1] - Cn[1]
        u_nodes[k] = (cs * a - sn * bb) @ ops.inv
        C = C + incs[k]
        t_end = edges[k + 1]
        u_end, w_end = rotate(z0[0] - C[0], z0[1] - C[1], t_end * ops.psi)
        states[k, 0], states[k, 1] = u_end, w_end
    return u_nodes, states, incs


def _branch_norm_terms(states_by_sign, plan, params):
    """Weighted norm of a difference given per-branch stacked states."""
    mesh = params.mesh
    t = mesh.output_times
    times, norms = [], []
    for sign, st in states_by_sign.items():
        times.append(sign * t)
        norms.append(x_norms(st, plan, params.p, params.d))
    return _weighted(np.concatenate(times), np.concatenate(norms), _default_mode(params), params)


def picard_solve(data: PairState, params: SolverParams, plan: TransformPlan, *,
                 check_smallness: bool = True, source_off: bool = False) -> Trajectory:
    """Fixed point of ``z = G(t) data + Duhamel(u)`` on ``[-T, T]``.

    The first iterate is the free evolution.  Iteration stops once the
    weighted distance between successive iterates falls below
    ``picard_tol * e0``; one more application of the map measures the
    residual of the returned trajectory.

    Parameters
    ----------
    data : PairState
    params : SolverParams
    plan : TransformPlan
    check_smallness : bool
        In global mode, refuse data whose norm exceeds ``params.epsilon``.
    source_off : bool
        Replace the nonlinearity by zero (the trajectory is then the free
        flow).

    Raises
    ------
    SmallnessError
    NonContractionError
        If the ratio of successive distances is ``>= 1`` three times in a
        row.
    """
    if data.grid is not plan.sgrid:
        raise GridMismatchError("data is not on this plan's spectral grid")
    ops = _Operators.of(plan)
    mesh = params.mesh
    e0 = e0_norm(data, params, plan)
    if check_smallness and params.exponents.mode == "global" and e0 > params.epsilon:
        raise SmallnessError(f"data norm {e0:.3e} exceeds epsilon = {params.epsilon:.3e}")
    u0, w0 = data.u_hat.values, data.w_hat.values
    # backward branch in the reversed frame: data (u0, -w0)
    mirror = not np.any(w0)
    signs = (1,) if mirror else (1, -1)
    z0 = {1: np.stack([u0, w0]), -1: np.stack([u0, -w0])}

    cur = {}
    for sg in signs:
        cur[sg] = _sweep(z0[sg], None, ops, mesh, params.b)
    history, ratios = [], []
    residual = 0.0
    scale = e0 if e0 > 0 else 1.0
    bad = 0
    if e0 == 0 or source_off:
        history.append(0.0)
    else:
        while len(history) < params.picard_max_iter:
            nxt = {sg: _sweep(z0[sg], cur[sg][0], ops, mesh, params.b) for sg in signs}
            dist = _branch_norm_terms({sg: nxt[sg][1] - cur[sg][1] for sg in signs}, plan, params)
            history.append(dist)
            cur = nxt
            if len(history) >= 2 and history[-2] > 0:
                ratios.append(dist / history[-2])
                bad = bad + 1 if ratios[-1] >= 1 else 0
                if bad >= 3:
                    raise NonContractionError(
                        f"Picard ratio {ratios[-1]:.3g} >= 1 for three iterates", ratios[-1], history)
            if dist <= params.picard_tol * scale:
                break
        else:
            warnings.warn("Picard iteration hit picard_max_iter before converging",
                          RuntimeWarning, stacklevel=2)
        # residual: one more application of the map to the returned iterate
        again = {sg: _sweep(z0[sg], cur[sg][0], ops, mesh, params.b)[1] for sg in signs}
        residual = _branch_norm_terms({sg: again[sg] - cur[sg][1] for sg in signs},
                                      plan, params) / scale

    branches = {sg: _Branch(z0[sg], *cur[sg]) for sg in signs}
    if mirror:
        branches[-1] = branches[1]
    t = mesh.output_times
    sg_states = []
    for k in range(t.size - 1, -1, -1):
        st = branches[-1].states[k]
        sg_states.append(PairState.from_arrays(plan.sgrid, st[0].copy(), -st[1]))
    for k in range(t.size):
        st = branches[1].states[k]
        sg_states.append(PairState.from_arrays(plan.sgrid, st[0].copy(), st[1].copy()))
    return Trajectory(params, plan, data, signed_times(params), sg_states, history, ratios,
                      residual, e0, branches)


def duhamel_term(traj: Trajectory, t: float, params: SolverParams | None = None,
                 plan: TransformPlan | None = None, *, source=None, order: int | None = None,
                 tol: float = 1e-8, return_error: bool = False):
    """``-int_0^t G(t - s) [0, f(u(s))] ds`` as a spectral pair.

    Composite Gauss quadrature on the graded panels of ``[0, |t|]``;
    ``u(s)`` is interpolated from the trajectory.  The estimate of the
    quadrature error is the change under doubling of the nodes per panel.

    Parameters
    ----------
    source : callable, optional
        ``source(s) -> (len(s), n_lam)`` frozen spectral source used in
        place of ``f(u(s))^``.
    order : int, optional
        Nodes per panel; defaults to ``params.order``.
    return_error : bool
        Also return the relative error estimate.

    Warns
    -----
    RuntimeWarning
        If the doubling estimate exceeds ``tol``.
    """
    params = params or traj.params
    plan = plan or traj.plan
    ops = _Operators.of(plan)
    zero = PairState.zeros(plan.sgrid)
    if t == 0:
        return (zero, 0.0) if return_error else zero
    sign = 1.0 if t > 0 else -1.0
    mesh = TimeMesh(abs(t), params.order, params.dyadic_levels)
    m = order or params.order

    if source is None:
        def source(s):
            u = np.stack([traj.u_at(sign * si) for si in s])
            return nonlinearity(u, params.b) @ ops.fwd

    def integral(mm):
        nodes, weights = mesh.nodes(mm)
        acc = np.zeros((2, ops.psi.size))
        for s, w in zip(nodes, weights):
            F = source(sign * s)
            ang = (abs(t) - s)[:, None] * ops.psi * sign
            # R((t - s) psi) [0, Q F]: u part -sin, w part cos
            acc[0] -= w @ (np.sin(ang) * ops.q * F)
            acc[1] += w @ (np.cos(ang) * ops.q * F)
        return sign * acc

    val = integral(m)
    fine = integral(2 * m)
    scale = max(np.max(np.abs(fine)), 1e-300)
    err = float(np.max(np.abs(fine - val)) / scale) if np.any(fine) else 0.0
    if err > tol:
        warnings.warn(f"Duhamel quadrature changed by {err:.2e} under node doubling",
                      RuntimeWarning, stacklevel=2)
    out = PairState.from_arrays(plan.sgrid, -fine[0], -fine[1])
    return (out, err) if return_error else out


# ---------------------------------------------------------------------------
# scattering
# ---------------------------------------------------------------------------

@dataclass
class ScatteringReport:
    state: PairState
    times: np.ndarray
    difference_norms: np.ndarray
    exponent: float
    fit_range: tuple
    tail_estimate: float
    construction_residual: float


def scattering_state(traj: Trajectory, params: SolverParams | None = None,
                     plan: TransformPlan | None = None, fit_range=(4.0, 64.0),
                     tail_warn: float = 0.1) -> ScatteringReport:
    """Scattering data ``z0+ = z0 - C(infinity)`` and the decay of ``z - z+``.

    ``C`` is truncated at the horizon.  The neglected tail is estimated by
    extrapolating the contributions of ``[T/4, T/2]`` and ``[T/2, T]``
    geometrically, in the ``X`` norm at the last fitted time; a warning is
    issued when it exceeds ``tail_warn`` times the difference norm there.
    """
    params = params or traj.params
    plan = plan or traj.plan
    br = traj.branches[1]
    mesh = params.mesh
    t = mesh.output_times
    incs = br.increments
    C_T = incs.sum(axis=0)
    z_plus = br.z0 - C_T
    state = PairState.from_arrays(plan.sgrid, z_plus[0], z_plus[1])

    # C(T) - C(t_k): contributions of the panels after the k-th output time
    after = np.cumsum(incs[::-1], axis=0)[::-1]
    rest = np.concatenate([after[1:], np.zeros_like(after[:1])])
    ang = t[:, None] * psi(plan.sgrid.nodes, plan.geometry)
    du, dw = rotate(rest[:, 0], rest[:, 1], ang)
    diffs = np.stack([du, dw], axis=1)

    norms = x_norms(diffs, plan, params.p, params.d)
    lo, hi = fit_range
    fit = (t >= lo) & (t <= hi) & (norms > 0)
    exponent = loglog_slope(t[fit], norms[fit]) if fit.sum() >= 2 else math.nan

    # tail beyond T: geometric extrapolation of the last two octaves,
    # measured in the same norm at the end of the fit range
    e = mesh.edges
    t_ref = t[fit][-1] if fit.any() else t[-1]
    octave = []
    for a_, b_ in ((params.T / 4, params.T / 2), (params.T / 2, params.T)):
        sel = (e[:-1] >= a_) & (e[1:] <= b_)
        piece = incs[sel].sum(axis=0)
        pu, pw = rotate(piece[0], piece[1], t_ref * psi(plan.sgrid.nodes, plan.geometry))
        octave.append(float(x_norms(np.stack([pu, pw]), plan, params.p, params.d)))
    if octave[0] > 0 and octave[1] < octave[0]:
        q = octave[1] / octave[0]
        tail = octave[1] * q / (1 - q)
    else:
        tail = math.inf if octave[1] > 0 else 0.0
    ref = norms[t == t_ref][0] if np.any(t == t_ref) else 0.0
    if tail > tail_warn * ref:
        warnings.warn(f"tail beyond the horizon ({tail:.2e}) is not negligible next to "
                      f"the difference norm {ref:.2e}", RuntimeWarning, stacklevel=2)

    # G(t) z0+ = z(t) - R(t psi)(C(T) - C(t)) by construction
    lin = linear_states(state, t, plan)
    recon = br.states - diffs
    resid = float(np.max(np.abs(lin - recon)) / max(np.max(np.abs(lin)), 1e-300))
    return ScatteringReport(state, t, norms, exponent, (lo, hi), tail, resid)


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------

@dataclass
class StabilityReport:
    times: np.ndarray
    nonlinear: np.ndarray
    linear: np.ndarray
    slope_nonlinear: float
    slope_linear: float
    trajectories: tuple = field(repr=False, default=())

    @staticmethod
    def _trend(seq):
        seq = np.asarray(seq)
        if not np.any(seq):
            return True
        return bool(seq[-1] < seq[0] and np.all(seq > 0))

    @property
    def nonlinear_decreasing(self) -> bool:
        return self._trend(self.nonlinear) and (not np.any(self.nonlinear) or self.slope_nonlinear < 0)

    @property
    def linear_decreasing(self) -> bool:
        return self._trend(self.linear) and (not np.any(self.linear) or self.slope_linear < 0)

    @property
    def equivalent(self) -> bool:
        return self.nonlinear_decreasing == self.linear_decreasing


def stability_experiment(data1: PairState, data2: PairState, params: SolverParams,
                         plan: TransformPlan, map_fn=map) -> StabilityReport:
    """Weighted differences of two solutions and of their free flows.

    Both sequences ``t^{alpha2 + h} ||.||_{X(b+1, d)}`` are sampled on
    ``t = 1, 2, 4, ..., T``.
    """
    if not params.alpha2 < 1.5 - params.h:
        raise ModeError("stability needs alpha2 < 3/2 - h")
    trajs = tuple(map_fn(lambda d: picard_solve(d, params, plan), (data1, data2)))
    t = params.mesh.dyadic_times()
    w = t ** (params.alpha2 + params.h)
    diff = np.stack([np.stack([(trajs[0].state_at(x) - trajs[1].state_at(x)).u_hat.values,
                               (trajs[0].state_at(x) - trajs[1].state_at(x)).w_hat.values])
                     for x in t])
    nl = w * x_norms(diff, plan, params.p, params.d)
    lin = w * x_norms(linear_states(data1 - data2, t, plan), plan, params.p, params.d)

    def slope(seq):
        return loglog_slope(t, seq) if np.all(seq > 0) else 0.0

    return StabilityReport(t, nl, lin, slope(nl), slope(lin), trajs)


# ---------------------------------------------------------------------------
# Beta identity
# ---------------------------------------------------------------------------

def beta_identity_check(l1: float, l2: float, t: float) -> dict:
    """Compare ``int_0^t (t-s)^{-l1} s^{-l2} ds`` with ``t^{1-l1-l2} B(1-l1, 1-l2)``."""
    if not (l1 < 1 and l2 < 1):
        raise ValueError("l1, l2 < 1 required")
    quad, qerr = integrate.quad(lambda s: 1.0, 0.0, t, weight="alg", wvar=(-l2, -l1),
                                epsabs=0, epsrel=1e-13)
    B = gamma_complex(1 - l1) * gamma_complex(1 - l2) / gamma_complex(2 - l1 - l2)
    closed = float(np.real(t ** (1 - l1 - l2) * B))
    return {"l1": l1, "l2": l2, "t": t, "quadrature": quad, "closed_form": closed,
            "relative_error": abs(quad - closed) / abs(closed), "quad_error": qerr}


# ---------------------------------------------------------------------------
# rough data
# ---------------------------------------------------------------------------

def _default_modulation(k, s):
    return lambda z: z ** k * np.exp(s * z) / (1 + z) ** k


@dataclass(frozen=True)
class RoughDataSpec:
    """Single-center superposition of singular, critically decaying profiles.

    ``u0 = sum kappa_j R_j(r) Gamma(r)`` and ``v0 = sum mu_j S_j(r) Gamma~(r)``
    with ``Gamma = r^{-nb/(b+1)-k}`` on ``r < 1`` and
    ``exp(-((n-1)b/(b+1) + s) r)`` beyond (``Gamma~`` likewise with
    ``k~, s~``).  The modulations default to ``z^k e^{sz} / (1+z)^k``.

    ``centers`` are geodesic offsets of the singular points; only ``0`` is
    supported since off-center profiles are not radial.
    """

    geometry: GeometryParams
    b: float
    kappa: tuple = (1.0,)
    mu: tuple = ()
    k: float = 0.0
    s: float = 0.0
    k_tilde: float = 0.0
    s_tilde: float = 0.0
    centers: tuple = (0.0,)
    modulation_u: object = None
    modulation_v: object = None

    def __post_init__(self):
        if min(self.k, self.s, self.k_tilde, self.s_tilde) < 0:
            raise ConstraintError("k, s, k~, s~ must be nonnegative")
        if any(c != 0 for c in self.centers):
            raise ConstraintError("only centered profiles are radial")
        if not self.b > 1:
            raise ConstraintError("b > 1 required")

    def profile(self, r, tilde=False):
        n, b = self.geometry.n, self.b
        k = self.k_tilde if tilde else self.k
        s = self.s_tilde if tilde else self.s
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            near = r ** (-n * b / (b + 1) - k)
        far = np.exp(-((n - 1) * b / (b + 1) + s) * r)
        return np.where(r < 1, near, far)

    def u0(self, r):
        mod = self.modulation_u or _default_modulation(self.k, self.s)
        g = self.profile(r) * mod(np.asarray(r, dtype=float))
        return sum(c * g for c in self.kappa) if self.kappa else np.zeros_like(g)

    def v0(self, r):
        mod = self.modulation_v or _default_modulation(self.k_tilde, self.s_tilde)
        g = self.profile(r, tilde=True) * mod(np.asarray(r, dtype=float))
        return sum(c * g for c in self.mu) if self.mu else np.zeros_like(g)


def _refined_grid(geometry, r_min, r_max=30.0, per_octave=512, far_step=0.002):
    """Cell midpoints and measures: geometric cells below 1, uniform above."""
    n_geo = max(int(round(per_octave * math.log2(1.0 / r_min))), 1)
    inner = np.geomspace(r_min, 1.0, n_geo + 1)
    outer = np.arange(1.0, r_max + far_step / 2, far_step)
    edges = np.concatenate([inner, outer[1:]])
    lo, hi = edges[:-1], edges[1:]
    mid = np.sqrt(lo * hi)
    mid[lo >= 1] = 0.5 * (lo + hi)[lo >= 1]
    # exact shell volumes
    meas = geometry.sphere_area * (_shell(geometry.n, hi) - _shell(geometry.n, lo))
    return mid, meas


def _shell(n, r):
    """``int_0^r sinh^{n-1}``."""
    r = np.asarray(r, dtype=float)
    if n == 2:
        return np.cosh(r) - 1
    if n == 3:
        return 0.5 * (np.sinh(r) * np.cosh(r) - r)
    out = np.empty_like(r)
    for i, x in enumerate(r):
        out[i] = integrate.quad(lambda y: np.sinh(y) ** (n - 1), 0, x)[0]
    return out


@dataclass
class RoughDataReport:
    r_min: np.ndarray
    weak_norms: np.ndarray
    local_l2: np.ndarray
    growth: np.ndarray
    weak_stable: bool
    l2_diverging: bool


def rough_data_diagnostics(spec: RoughDataSpec, doublings: int = 3, r_min0: float = 1e-3,
                           which: str = "u") -> RoughDataReport:
    """Weak-``L^{(b+1)/b}`` norm and ``L^2(ball)`` norm under refinement at the center.

    Each refinement halves the smallest resolved radius.  The weak norm is
    "stable" when it changes by less than 1% over the doublings; the local
    ``L^2`` norm "diverges in trend" when every doubling multiplies it by
    more than 1.5.
    """
    p = (spec.b + 1) / spec.b
    f = spec.u0 if which == "u" else spec.v0
    rmins = r_min0 * 2.0 ** -np.arange(doublings + 1)
    weak, l2 = [], []
    for rm in rmins:
        mid, meas = _refined_grid(spec.geometry, rm)
        vals = np.abs(f(mid))
        weak.append(lorentz_from_samples(vals, meas, p, math.inf, warn=False))
        ball = mid < 1
        l2.append(math.sqrt(np.sum(vals[ball] ** 2 * meas[ball])))
    weak, l2 = np.array(weak), np.array(l2)
    growth = l2[1:] / l2[:-1]
    stable = bool(np.all(np.abs(np.diff(weak)) <= 0.01 * np.abs(weak[1:])))
    return RoughDataReport(rmins, weak, l2, growth, stable, bool(np.all(growth > 1.5)))


def make_rough_data(spec: RoughDataSpec, plan: TransformPlan, *, check: bool = True) -> PairState:
    """Rough data as a spectral pair on ``plan``.

    With ``check`` the weak norm of ``u0`` is confirmed finite under
    refinement (see :func:`rough_data_diagnostics`).

    Raises
    ------
    ConstraintError
        If the weak norm does not settle.
    """
    if check and spec.kappa and any(spec.kappa):
        rep = rough_data_diagnostics(spec)
        if not (np.all(np.isfinite(rep.weak_norms)) and rep.weak_stable):
            raise ConstraintError("weak norm of u0 does not settle under refinement")
    r = plan.rgrid.nodes
    uh = forward_values(spec.u0(r), plan, warn=False)
    vh = forward_values(spec.v0(r), plan, warn=False)
    g = plan.geometry
    wh = xi_abs(plan.sgrid.nodes, g) / xi_bracket(plan.sgrid.nodes, g) * vh
    return PairState.from_arrays(plan.sgrid, uh, wh)


def gaussian_data(plan: TransformPlan, amplitude: float = 1e-3, width: float = 2.0,
                  velocity: bool = False) -> PairState:
    """``u0 = amplitude exp(-r^2 / (2 width^2))`` and ``v0 = 0`` (or ``= u0``)."""
    r = plan.rgrid.nodes
    u = amplitude * np.exp(-r ** 2 / (2 * width ** 2))
    uh = forward_values(u, plan, warn=False)
    g = plan.geometry
    wh = xi_abs(plan.sgrid.nodes, g) / xi_bracket(plan.sgrid.nodes, g) * uh if velocity else np.zeros_like(uh)
    return PairState.from_arrays(plan.sgrid, uh, wh)
