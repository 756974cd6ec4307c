"""
Radial spherical Fourier transform on hyperbolic space.

A :class:`TransformPlan` stores a radial quadrature grid, a spectral
quadrature grid and the table of spherical functions between them.  With
volume element ``sinh(r)**(n-1) dr dS``:

    forward:  F(lam) = |S^{n-1}| int_0^inf f(r) Phi_lam(r) sinh(r)**(n-1) dr
    inverse:  f(r)   = c int_R F(lam) Phi_lam(r) D(lam) dlam

where ``D`` is the Plancherel density and ``c`` the inversion constant,
fixed numerically by :func:`calibrate`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import gauss_legendre
from .specfun import GeometryParams, SphericalEvaluator, plancherel_density


class GridMismatchError(ValueError):
    """Function and plan live on different grids."""


class CalibrationError(RuntimeError):
    """The reference round trip is not accurate enough."""


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes on ``(0, r_max]`` for ``int f sinh^{n-1}(r) dr``.

    Attributes
    ----------
    nodes : ndarray
    weights : ndarray
        Weights including the ``sinh(r)**(n-1)`` factor.
    r_max : float
    geometry : GeometryParams
    kind : str
        ``"gauss"`` or ``"uniform"``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    geometry: GeometryParams
    kind: str = "gauss"

    @classmethod
    def gauss(cls, geometry: GeometryParams, r_max: float = 25.0,
              n_nodes: int = 1024, stretch: float = 1.0) -> "RadialGrid":
        """Gauss-Legendre nodes in ``x`` mapped by ``r = r_max sinh(a x)/sinh(a)``.

        The stretch puts more nodes near the origin.  ``stretch=0`` gives
        the plain affine map.
        """
        if r_max <= 0 or n_nodes < 4:
            raise ValueError("need r_max > 0 and at least 4 nodes")
        x, w = gauss_legendre(n_nodes, 0.0, 1.0)
        if stretch > 0:
            a = float(stretch)
            r = r_max * np.sinh(a * x) / math.sinh(a)
            dr = r_max * a * np.cosh(a * x) / math.sinh(a)
        else:
            r, dr = r_max * x, np.full_like(x, r_max)
        weights = w * dr * np.sinh(r) ** (geometry.n - 1)
        return cls(r, weights, float(r_max), geometry, "gauss")

    @classmethod
    def uniform(cls, geometry: GeometryParams, r_max: float, n_nodes: int) -> "RadialGrid":
        """Nodes ``h, 2h, ..., r_max`` with composite Simpson weights.

        The implicit node at ``r = 0`` carries no mass because the volume
        factor vanishes there.  ``n_nodes`` must be even.
        """
        if n_nodes < 4 or n_nodes % 2:
            raise ValueError("uniform grid needs an even number of nodes >= 4")
        h = r_max / n_nodes
        r = h * np.arange(1, n_nodes + 1)
        simpson = np.where(np.arange(1, n_nodes + 1) % 2 == 1, 4.0, 2.0)
        simpson[-1] = 1.0
        weights = h / 3.0 * simpson * np.sinh(r) ** (geometry.n - 1)
        return cls(r, weights, float(r_max), geometry, "uniform")

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def measure(self) -> np.ndarray:
        """Riemannian volume carried by each node (includes ``|S^{n-1}|``)."""
        return self.geometry.sphere_area * self.weights

    @property
    def dr_weights(self) -> np.ndarray:
        """Weights for plain ``dr`` integration."""
        return self.weights / np.sinh(self.nodes) ** (self.geometry.n - 1)

    @property
    def spacing(self) -> float:
        if self.kind != "uniform":
            raise ValueError("spacing is only defined for uniform grids")
        return self.r_max / self.size


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Nodes ``lam >= 0`` with weights for ``int_R g(lam) D(lam) dlam``.

    The integrand is assumed even in ``lam``, so the weights carry a
    factor 2.

    Attributes
    ----------
    nodes, weights : ndarray
    density : ndarray
        Plancherel density at the nodes.
    lam_max : float
    geometry : GeometryParams
    """

    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    lam_max: float
    geometry: GeometryParams

    @classmethod
    def gauss(cls, geometry: GeometryParams, lam_max: float = 64.0,
              n_nodes: int = 1024, segments=None) -> "SpectralGrid":
        """Gauss-Legendre nodes on ``[0, lam_max]``.

        Parameters
        ----------
        segments : sequence of (float, int), optional
            Piecewise rule: pairs ``(upper_end, n_nodes)`` in increasing
            order.  Overrides ``lam_max`` and ``n_nodes``; useful to put
            dense nodes where oscillatory multipliers need them.
        """
        if segments is None:
            segments = [(float(lam_max), int(n_nodes))]
        lo = 0.0
        xs, ws = [], []
        for hi, m in segments:
            if hi <= lo or m < 2:
                raise ValueError("segments must increase and hold >= 2 nodes")
            x, w = gauss_legendre(int(m), lo, float(hi))
            xs.append(x)
            ws.append(w)
            lo = float(hi)
        x = np.concatenate(xs)
        w = np.concatenate(ws)
        dens = plancherel_density(x, geometry)
        return cls(x, 2.0 * w * dens, dens, lo, geometry)

    @property
    def size(self) -> int:
        return self.nodes.size


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Samples of a radial function on a :class:`RadialGrid`."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.nodes.shape:
            raise GridMismatchError(
                f"{v.shape[0] if v.ndim else 0} values for a grid of {self.grid.size} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("radial samples must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, func, grid: RadialGrid) -> "RadialFunction":
        return cls(grid, np.asarray(func(grid.nodes)))

    def _other(self, other):
        if isinstance(other, RadialFunction):
            if other.grid is not self.grid:
                raise GridMismatchError("radial functions on different grids")
            return other.values
        return other

    def __add__(self, other):
        return RadialFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return RadialFunction(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return RadialFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return RadialFunction(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Samples of a spectral function on a :class:`SpectralGrid`."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.nodes.shape:
            raise GridMismatchError("spectral values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectral samples must be finite")
        object.__setattr__(self, "values", v)

    def _other(self, other):
        if isinstance(other, SpectralFunction):
            if other.grid is not self.grid:
                raise GridMismatchError("spectral functions on different grids")
            return other.values
        return other

    def __add__(self, other):
        return SpectralFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SpectralFunction(self.grid, self.values - self._other(other))

    def __mul__(self, other):
        return SpectralFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralFunction(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class TransformPlan:
    """Grids, spherical-function table and inversion constant.

    ``phi[i, j]`` holds ``Phi_{lam_i}(r_j)``.
    """

    geometry: GeometryParams
    rgrid: RadialGrid
    sgrid: SpectralGrid
    phi: np.ndarray
    inverse_calibration: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def analytic_calibration(self) -> float:
        """Inversion constant predicted by the Plancherel theorem."""
        n = self.geometry.n
        return 2.0 ** (1 - n) / (self.geometry.sphere_area * math.gamma(0.5 * n) ** 2)


def make_plan(geometry: GeometryParams, r_max: float = 25.0, n_r: int = 1024,
              lam_max: float = 64.0, n_lam: int = 1024, *, stretch: float = 1.0,
              lam_segments=None, evaluator: SphericalEvaluator | None = None,
              calibrate_plan: bool = True) -> TransformPlan:
    """Build (and by default calibrate) a transform plan.

    Parameters
    ----------
    geometry : GeometryParams
    r_max, n_r : float, int
        Radial truncation and node count.
    lam_max, n_lam : float, int
        Spectral truncation and node count.
    stretch : float
        Sinh-stretch parameter of the radial map.
    lam_segments : sequence of (float, int), optional
        Piecewise spectral rule, see :meth:`SpectralGrid.gauss`.
    evaluator : SphericalEvaluator, optional
    calibrate_plan : bool
        Run :func:`calibrate` on the new plan.
    """
    rg = RadialGrid.gauss(geometry, r_max, n_r, stretch)
    sg = SpectralGrid.gauss(geometry, lam_max, n_lam, segments=lam_segments)
    ev = evaluator or SphericalEvaluator(geometry)
    phi = ev.matrix(sg.nodes, rg.nodes)
    plan = TransformPlan(geometry, rg, sg, phi)
    return calibrate(plan) if calibrate_plan else plan


def _values(f, grid, kind):
    if isinstance(f, (RadialFunction, SpectralFunction)):
        if f.grid is not grid:
            raise GridMismatchError(f"{kind} function was sampled on a different grid")
        return f.values
    v = np.asarray(f)
    if v.shape[-1] != grid.size:
        raise GridMismatchError(f"expected {grid.size} {kind} samples, got {v.shape[-1]}")
    return v


def forward_values(values, plan: TransformPlan, warn: bool = True):
    """Forward transform of raw samples; last axis runs over radial nodes."""
    v = np.asarray(values)
    if warn:
        tail = np.max(np.abs(v[..., -1])) if v.size else 0.0
        scale = np.max(np.abs(v)) if v.size else 0.0
        if scale > 0 and tail > 1e-12 * scale:
            warnings.warn("function is not negligible at r_max; the transform is truncated",
                          RuntimeWarning, stacklevel=3)
    return plan.geometry.sphere_area * ((v * plan.rgrid.weights) @ plan.phi.T)


def inverse_values(values, plan: TransformPlan):
    """Inverse transform of raw spectral samples (last axis = spectral nodes)."""
    v = np.asarray(values)
    return plan.inverse_calibration * ((v * plan.sgrid.weights) @ plan.phi)


def forward(f, plan: TransformPlan) -> SpectralFunction:
    """Spherical transform of a radial function.

    Parameters
    ----------
    f : RadialFunction or array_like
        Samples on ``plan.rgrid``.
    plan : TransformPlan

    Returns
    -------
    SpectralFunction

    Warns
    -----
    RuntimeWarning
        If ``|f(r_max)|`` exceeds ``1e-12`` of ``max |f|``.
    """
    v = _values(f, plan.rgrid, "radial")
    return SpectralFunction(plan.sgrid, forward_values(v, plan))


def inverse(fhat, plan: TransformPlan) -> RadialFunction:
    """Inverse spherical transform back to the radial grid."""
    v = _values(fhat, plan.sgrid, "spectral")
    return RadialFunction(plan.rgrid, inverse_values(v, plan))


def l2_norm_sq(f, plan: TransformPlan) -> float:
    """``||f||_2^2`` computed on the radial grid."""
    v = _values(f, plan.rgrid, "radial")
    return float(np.sum(np.abs(v) ** 2 * plan.rgrid.measure))


def spectral_norm_sq(fhat, plan: TransformPlan) -> float:
    """``c int |F|^2 D dlam``, equal to ``||f||_2^2`` by Plancherel."""
    v = _values(fhat, plan.sgrid, "spectral")
    return float(plan.inverse_calibration * np.sum(np.abs(v) ** 2 * plan.sgrid.weights))


def reference_bump(r):
    """Calibration profile ``exp(-r^2)``."""
    return np.exp(-np.asarray(r) ** 2)


def calibrate(plan: TransformPlan, tol: float = 1e-6) -> TransformPlan:
    """Fix the inversion constant by a least-squares round trip of ``exp(-r^2)``.

    The constant is computed from the uncalibrated round trip, so calling
    this twice gives the same plan.

    Raises
    ------
    CalibrationError
        If the calibrated round trip still misses by ``tol`` or more
        (sup-relative), which means the grids do not resolve the bump.
    """
    f = reference_bump(plan.rgrid.nodes)
    fhat = forward_values(f, plan, warn=False)
    raw = (fhat * plan.sgrid.weights) @ plan.phi
    c = float(np.dot(raw, f) / np.dot(raw, raw))
    err = float(np.max(np.abs(c * raw - f)) / np.max(np.abs(f)))
    if not err < tol:
        raise CalibrationError(
            f"round trip of exp(-r^2) misses by {err:.2e} (tolerance {tol:.0e}); "
            "refine or enlarge the grids")
    info = dict(plan.info, calibration_error=err)
    return replace(plan, inverse_calibration=c, info=info)


def roundtrip_error(f, plan: TransformPlan) -> float:
    """Sup-relative error of ``inverse(forward(f))``."""
    v = _values(f, plan.rgrid, "radial")
    back = inverse_values(forward_values(v, plan), plan)
    return float(np.max(np.abs(back - v)) / np.max(np.abs(v)))


def plancherel_error(f, plan: TransformPlan) -> float:
    """Relative mismatch between the radial and spectral ``L^2`` norms."""
    v = _values(f, plan.rgrid, "radial")
    a = l2_norm_sq(v, plan)
    b = spectral_norm_sq(forward_values(v, plan), plan)
    return abs(a - b) / a


def laplace_beltrami_radial(f) -> RadialFunction:
    """Radial Laplace-Beltrami operator by finite differences.

    Applies ``f'' + (n-1) coth(r) f'`` with second-order central
    differences on a uniform grid, one-sided at both ends.

    Parameters
    ----------
    f : RadialFunction
        Samples on a uniform :class:`RadialGrid` with at least 4 nodes.
    """
    grid = f.grid
    if grid.kind != "uniform":
        raise ValueError("finite differences need a uniform radial grid")
    h = grid.spacing
    r, v = grid.nodes, np.asarray(f.values)
    if v.size < 4:
        raise ValueError("need at least 4 nodes")
    d1 = np.empty_like(v)
    d2 = np.empty_like(v)
    d1[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    d2[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h ** 2
    d1[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    d1[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    d2[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h ** 2
    d2[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h ** 2
    out = d2 + (grid.geometry.n - 1) / np.tanh(r) * d1
    return RadialFunction(grid, out)


def resample(f: RadialFunction, grid: RadialGrid) -> RadialFunction:
    """Cubic-spline resampling onto another radial grid (even extension at 0)."""
    r = np.concatenate([-f.grid.nodes[::-1], f.grid.nodes])
    v = np.concatenate([f.values[::-1], f.values])
    spline = CubicSpline(r, v)
    inside = grid.nodes <= f.grid.nodes[-1]
    out = np.zeros(grid.size, dtype=np.result_type(f.values, float))
    out[inside] = spline(grid.nodes[inside])
    return RadialFunction(grid, out)
