"""
Special functions on real hyperbolic space.

Complex Gamma function, the Plancherel density of the radial spherical
transform and the zonal spherical functions ``Phi_lambda(r)`` of the
hyperbolic space of dimension ``n``.

The spherical function is computed from its one-dimensional integral
representation

    Phi_lambda(r) = 2**rho / Z * sinh(r)**(-rho)
                    * int_0^r cos(lambda s) K(r, s)**(rho - 1) ds,

with ``K(r, s) = (cosh r - cosh s) / sinh r`` and ``Z`` the measure of the
unit sphere ``S^{n-2}`` divided by that of ``S^{n-3}``.  The substitution
``s = r sin(phi)`` removes the endpoint singularity that appears in even
dimension so plain Gauss-Legendre converges geometrically.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .quadrature import gauss_legendre


class QuadratureError(RuntimeError):
    """Raised when an adaptive rule cannot reach the requested tolerance."""


class PoleError(ValueError):
    """Argument sits on a pole of the Gamma function."""


@dataclass(frozen=True)
class GeometryParams:
    """Dimension data for hyperbolic space.

    Parameters
    ----------
    n : int
        Dimension, at least 2.
    """

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def rho(self) -> float:
        """Half the volume growth rate, ``(n - 1) / 2``."""
        return 0.5 * (self.n - 1)

    @property
    def sphere_area(self) -> float:
        """Surface measure of the unit sphere ``S^{n-1}``."""
        return 2.0 * math.pi ** (0.5 * self.n) / math.gamma(0.5 * self.n)


# ---------------------------------------------------------------------------
# Gamma function
# ---------------------------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _lanczos_log(z):
    # valid for Re z >= 1/2
    zm = z - 1.0
    acc = np.full_like(zm, _LANCZOS_COEF[0])
    for k in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[k] / (zm + k)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(t) - t + np.log(acc)


def _log_sin_pi(z):
    # log(sin(pi z)) on any branch, stable for large |Im z|
    out = np.empty_like(z)
    big = np.abs(z.imag) > 5.0
    small = ~big
    out[small] = np.log(np.sin(np.pi * z[small]))
    if np.any(big):
        zb = z[big]
        flip = zb.imag < 0
        w = np.where(flip, np.conj(zb), zb)
        # sin(pi w) = (1 - exp(2 i pi w)) * exp(-i pi w) / (-2i)  for Im w > 0
        lw = -1j * np.pi * w + np.log1p(-np.exp(2j * np.pi * w)) - np.log(-2j)
        out[big] = np.where(flip, np.conj(lw), lw)
    return out


def loggamma_complex(z):
    """Logarithm of the Gamma function for complex arguments.

    The branch is not the principal one, only ``exp`` of the result is
    meaningful.  Poles give ``inf``.

    Parameters
    ----------
    z : complex or array_like

    Returns
    -------
    complex or ndarray
    """
    zz = np.asarray(z, dtype=complex)
    scalar = zz.ndim == 0
    zz = np.atleast_1d(zz)
    out = np.empty_like(zz)
    right = zz.real >= 0.5
    if np.any(right):
        out[right] = _lanczos_log(zz[right])
    left = ~right
    if np.any(left):
        zl = zz[left]
        pole = (zl.imag == 0) & (zl.real == np.round(zl.real))
        zl_safe = np.where(pole, 0.5, zl)
        val = math.log(math.pi) - _log_sin_pi(zl_safe) - _lanczos_log(1.0 - zl_safe)
        out[left] = np.where(pole, complex(np.inf, 0.0), val)
    return out[0] if scalar else out


def gamma_complex(z):
    """Gamma function for complex arguments.

    Lanczos approximation for ``Re z >= 1/2`` and the reflection formula
    elsewhere.  Relative accuracy is about ``1e-13`` for ``|Re z| <= 10``
    and ``|Im z| <= 100``.

    Parameters
    ----------
    z : complex or array_like

    Returns
    -------
    complex or ndarray

    Raises
    ------
    PoleError
        If any argument is one of the poles ``0, -1, -2, ...``.
    """
    zz = np.asarray(z, dtype=complex)
    if np.any((zz.imag == 0) & (zz.real <= 0) & (zz.real == np.round(zz.real))):
        raise PoleError(f"Gamma has a pole at {z!r}")
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(loggamma_complex(z))


# ---------------------------------------------------------------------------
# Plancherel density
# ---------------------------------------------------------------------------

def plancherel_density(lam, geometry: GeometryParams, calibration: float = 1.0):
    """Plancherel density ``|Gamma(i lam + rho)|^2 / |Gamma(i lam)|^2``.

    Written as ``lam**2 |Gamma(rho + i lam)|^2 / |Gamma(1 + i lam)|^2`` so the
    zero at the origin is exact.  Complex ``lam`` gives the analytic
    continuation, which is holomorphic away from the imaginary axis.

    Parameters
    ----------
    lam : float, complex or array_like
    geometry : GeometryParams
    calibration : float, optional
        Overall factor.

    Returns
    -------
    ndarray or scalar
        Real when ``lam`` is real.
    """
    lam_arr = np.asarray(lam)
    is_real = not np.iscomplexobj(lam_arr)
    if is_real:
        # evaluate at |lam| so evenness holds bit for bit
        lam_arr = np.abs(lam_arr)
    z = lam_arr.astype(complex)
    rho = geometry.rho
    if float(rho).is_integer():
        # rho = m: lam^2 prod_{k<m} (k^2 + lam^2)
        val = z * z
        for k in range(1, int(rho)):
            val = val * (k * k + z * z)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            logs = (loggamma_complex(rho + 1j * z) + loggamma_complex(rho - 1j * z)
                    - loggamma_complex(1.0 + 1j * z) - loggamma_complex(1.0 - 1j * z))
            val = z * z * np.exp(logs)
    val = calibration * val
    if is_real:
        val = val.real
    return val[()] if np.ndim(val) == 0 else val


@dataclass(frozen=True)
class PlancherelDensity:
    """Callable wrapper around :func:`plancherel_density`."""

    geometry: GeometryParams
    calibration: float = 1.0

    def __call__(self, lam):
        return plancherel_density(lam, self.geometry, self.calibration)


# ---------------------------------------------------------------------------
# Spherical functions
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gl_half_pi(m: int):
    return gauss_legendre(m, 0.0, 0.5 * np.pi)


def _abel_weights(r, geometry: GeometryParams, m: int):
    """Nodes ``s = r sin(phi)`` and weights, so Phi = sum cos(lam s) w.

    ``r`` is a 1-d array of positive radii; returns arrays of shape
    ``(len(r), m)``.
    """
    phi, w = _gl_half_pi(m)
    rho = geometry.rho
    r = np.asarray(r, dtype=float)[:, None]
    s = r * np.sin(phi)
    # r - s = 2 r sin^2((pi/2 - phi) / 2), exact near the endpoint
    diff = 2.0 * r * np.sin(0.5 * (0.5 * np.pi - phi)) ** 2
    kern = 2.0 * np.sinh(0.5 * (2.0 * r - diff)) * np.sinh(0.5 * diff) / np.sinh(r)
    z = math.sqrt(math.pi) * math.gamma(rho) / math.gamma(0.5 * geometry.n)
    pref = 2.0 ** rho / z * np.sinh(r) ** (-rho) * r
    with np.errstate(divide="ignore"):
        weights = pref * kern ** (rho - 1.0) * np.cos(phi) * w
    return s, weights


def _nodes_for(lam_abs_max: float, r: float) -> int:
    m = int(0.7 * lam_abs_max * r + 24)
    return 1 << max(4, (m - 1).bit_length())


def spherical_phi(lam, r, geometry: GeometryParams, tol: float = 1e-12,
                  max_nodes: int = 2 ** 14):
    """Zonal spherical function ``Phi_lambda(r)`` by quadrature.

    The node count is doubled until two successive results agree to
    ``tol``.

    Parameters
    ----------
    lam : float, complex or array_like
        Spectral parameter.  Complex values are allowed.
    r : float or array_like
        Geodesic radius, ``r >= 0``.  Broadcast against ``lam``.
    geometry : GeometryParams
    tol : float, optional
        Agreement required between successive doublings.
    max_nodes : int, optional

    Returns
    -------
    ndarray or scalar

    Raises
    ------
    QuadratureError
        If ``max_nodes`` is reached before convergence.
    """
    lam_b, r_b = np.broadcast_arrays(np.asarray(lam), np.asarray(r, dtype=float))
    if np.any(r_b < 0):
        raise ValueError("radius must be non-negative")
    cplx = np.iscomplexobj(lam_b)
    lam_f = lam_b.astype(complex if cplx else float).ravel()
    r_f = r_b.ravel()
    out = np.ones(lam_f.shape, dtype=lam_f.dtype)
    todo = np.flatnonzero(r_f > 0)
    # each pair starts from its own node count and is doubled until settled
    m_pair = np.array([min(_nodes_for(a, b) // 2, max_nodes)
                       for a, b in zip(np.abs(lam_f[todo]), r_f[todo])], dtype=int)
    prev = np.full(todo.size, np.nan, dtype=lam_f.dtype)
    worst = 0.0
    while todo.size:
        cur = np.empty(todo.size, dtype=lam_f.dtype)
        for m in np.unique(m_pair):
            sel = np.flatnonzero(m_pair == m)
            s, w = _abel_weights(r_f[todo[sel]], geometry, int(m))
            cur[sel] = np.sum(np.cos(lam_f[todo[sel], None] * s) * w, axis=1)
        err = np.abs(cur - prev)
        ok = err < tol
        out[todo[ok]] = cur[ok]
        keep = ~ok
        if np.any(keep & (2 * m_pair > max_nodes)):
            bad = err[keep]
            worst = float(np.nanmax(bad)) if np.any(np.isfinite(bad)) else float("nan")
            raise QuadratureError(
                f"spherical function not converged with {max_nodes} nodes: "
                f"error {worst:.3e} > {tol:.1e}")
        todo, prev, m_pair = todo[keep], cur[keep], 2 * m_pair[keep]
    out = out.reshape(lam_b.shape)
    return out[()] if out.ndim == 0 else out


def phi_closed_form_3d(lam, r):
    """``sin(lam r) / (lam sinh r)``, the spherical function in dimension 3."""
    lam = np.asarray(lam)
    r = np.asarray(r, dtype=float)
    x = lam * r
    small = np.abs(x) < 1e-8
    x_safe = np.where(small, 1.0, x)
    sinc = np.where(small, 1.0 - x * x / 6.0, np.sin(x_safe) / x_safe)
    r_safe = np.where(r == 0, 1.0, r)
    ratio = np.where(r == 0, 1.0, r_safe / np.sinh(r_safe))
    out = sinc * ratio
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SphericalEvaluator:
    """Batch evaluation of ``Phi_lambda(r)``.

    Parameters
    ----------
    geometry : GeometryParams
    closed_form : bool, optional
        In dimension 3 use the elementary formula instead of quadrature.
    oversample : float, optional
        Multiplies the node count picked for the quadrature.
    """

    geometry: GeometryParams
    closed_form: bool = True
    oversample: float = 1.0

    @property
    def uses_closed_form(self) -> bool:
        return self.closed_form and self.geometry.n == 3

    def __call__(self, lam, r):
        """Elementwise values on broadcast ``lam`` and ``r``."""
        if self.uses_closed_form:
            return phi_closed_form_3d(lam, r)
        return spherical_phi(lam, r, self.geometry)

    def matrix(self, lam, r, block: int = 4_000_000):
        """Table ``Phi[i, j] = Phi_{lam_i}(r_j)``.

        Uses a fixed node count per radius, chosen from ``max|lam| * r``
        with a safety margin (see :func:`spherical_phi` for the adaptive
        version).
        """
        lam = np.asarray(lam)
        r = np.asarray(r, dtype=float)
        if self.uses_closed_form:
            return phi_closed_form_3d(lam[:, None], r[None, :])
        dtype = complex if np.iscomplexobj(lam) else float
        out = np.ones((lam.size, r.size), dtype=dtype)
        lmax = float(np.max(np.abs(lam))) if lam.size else 0.0
        pos = np.flatnonzero(r > 0)
        # group radii by node count to vectorise
        counts = np.array([_nodes_for(lmax * self.oversample, rr) for rr in r[pos]])
        for m in np.unique(counts):
            idx = pos[counts == m]
            chunk = max(1, block // (lam.size * int(m)))
            for start in range(0, idx.size, chunk):
                sel = idx[start:start + chunk]
                s, w = _abel_weights(r[sel], self.geometry, int(m))
                # (L, R, m) in blocks
                vals = np.einsum("lrm,rm->lr", np.cos(lam[:, None, None] * s[None]), w)
                out[:, sel] = vals
        return out
