import math

import mpmath
import numpy as np
import pytest

from hypdisp.quadrature import loglog_slope
from hypdisp.specfun import (GeometryParams, PlancherelDensity, PoleError, QuadratureError,
                             SphericalEvaluator, gamma_complex, loggamma_complex,
                             phi_closed_form_3d, plancherel_density, spherical_phi)
from hypdisp.transform import RadialFunction, RadialGrid, laplace_beltrami_radial


# --- geometry --------------------------------------------------------------

@pytest.mark.parametrize("bad", [1, 0, 2.5, True])
def test_geometry_rejects_bad_dimension(bad):
    with pytest.raises(ValueError):
        GeometryParams(bad)


def test_geometry_constants():
    for n in range(2, 7):
        g = GeometryParams(n)
        assert g.rho == (n - 1) / 2
        assert g.rho ** 2 >= 0.25
    assert GeometryParams(2).sphere_area == pytest.approx(2 * math.pi)
    assert GeometryParams(3).sphere_area == pytest.approx(4 * math.pi)


# --- Gamma -----------------------------------------------------------------

def test_gamma_classical_values():
    assert gamma_complex(1.0) == pytest.approx(1.0, rel=1e-14)
    assert gamma_complex(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    # |Gamma(i)|^2 = pi / sinh(pi)
    assert abs(gamma_complex(1j)) ** 2 == pytest.approx(math.pi / math.sinh(math.pi), rel=1e-13)
    assert abs(gamma_complex(1j)) ** 2 == pytest.approx(0.2720290550, rel=1e-9)


def test_gamma_against_mpmath_on_strip(rng):
    z = rng.uniform(-10, 10, 400) + 1j * rng.uniform(-100, 100, 400)
    got = gamma_complex(z)
    ref = np.array([complex(mpmath.gamma(complex(v))) for v in z])
    rel = np.abs(got - ref) / np.abs(ref)
    assert np.max(rel) < 1e-12


def test_gamma_poles_raise():
    for z in (0, -1, -7.0):
        with pytest.raises(PoleError):
            gamma_complex(z)


def test_loggamma_reflection_region():
    z = np.array([-3.5 + 0.25j, -0.5 + 40j])
    ref = np.array([complex(mpmath.gamma(complex(v))) for v in z])
    got = np.exp(loggamma_complex(z))
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-12


# --- Plancherel density ------------------------------------------------------

def test_density_n3_is_lambda_squared():
    g = GeometryParams(3)
    lam = np.linspace(0.1, 50, 200)
    ratio = plancherel_density(lam, g) / plancherel_density(1.0, g)
    assert np.max(np.abs(ratio / lam ** 2 - 1)) < 1e-10


def test_density_n2_is_lambda_tanh():
    g = GeometryParams(2)
    lam = np.linspace(0.01, 20, 300)
    assert np.max(np.abs(plancherel_density(lam, g) / (lam * np.tanh(np.pi * lam)) - 1)) < 1e-11


def test_density_zero_even_and_nonnegative():
    for n in range(2, 7):
        g = GeometryParams(n)
        assert plancherel_density(0.0, g) == 0.0
        lam = np.linspace(0, 30, 301)
        d = plancherel_density(lam, g)
        assert np.all(d >= 0)
        assert np.array_equal(d, plancherel_density(-lam, g))


def test_density_calibration_scales():
    g = GeometryParams(4)
    dens = PlancherelDensity(g, calibration=3.0)
    assert dens(2.0) == pytest.approx(3.0 * plancherel_density(2.0, g))


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_density_growth_and_c_function_slope(n):
    g = GeometryParams(n)
    lam = np.geomspace(50, 500, 12)
    d = plancherel_density(lam, g)
    assert loglog_slope(lam, d) == pytest.approx(2 * g.rho, abs=0.05)
    # |lam^{-1} c(lam)^{-1}| grows like lam^{rho - 1}
    assert loglog_slope(lam, np.sqrt(d) / lam) == pytest.approx(g.rho - 1, abs=0.05)


# --- spherical functions -----------------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_phi_normalized_at_origin(n):
    g = GeometryParams(n)
    assert np.allclose(spherical_phi([0.0, 1.0, 10.0], 0.0, g), 1.0, atol=1e-14)


def test_phi_closed_form_point():
    g = GeometryParams(3)
    ref = math.sin(2.0) / (2.0 * math.sinh(1.0))
    assert spherical_phi(2.0, 1.0, g) == pytest.approx(ref, abs=1e-8)


def test_phi_matches_closed_form_on_grid():
    g = GeometryParams(3)
    lam, r = np.meshgrid(np.linspace(0.1, 50, 50), np.linspace(0.05, 10, 50), indexing="ij")
    got = spherical_phi(lam, r, g)
    assert np.max(np.abs(got - phi_closed_form_3d(lam, r))) < 1e-8


@pytest.mark.parametrize("n,lam,r", [(2, 0.7, 1.3), (2, 5.0, 4.0), (4, 1.5, 2.0), (5, 3.0, 0.5),
                                     (6, 0.0, 3.0)])
def test_phi_against_hypergeometric_oracle(n, lam, r):
    g = GeometryParams(n)
    rho = g.rho
    ref = mpmath.hyp2f1((rho + 1j * lam) / 2, (rho - 1j * lam) / 2, n / 2, -mpmath.sinh(r) ** 2)
    assert spherical_phi(lam, r, g) == pytest.approx(float(mpmath.re(ref)), abs=1e-10)


def test_phi_even_real_and_bounded_by_phi0():
    g = GeometryParams(4)
    r = np.linspace(0.1, 8, 40)
    for lam in (0.5, 3.0, 12.0):
        a = spherical_phi(lam, r, g)
        assert np.all(np.isreal(a))
        assert np.allclose(a, spherical_phi(-lam, r, g), atol=1e-14)
        assert np.all(np.abs(a) <= spherical_phi(0.0, r, g) + 1e-12)


def test_phi_times_exp_rho_r_stays_bounded():
    g = GeometryParams(4)
    r = np.linspace(5, 30, 26)
    scaled = np.abs(spherical_phi(2.0, r, g)) * np.exp(g.rho * r)
    assert np.max(scaled) < 10.0


def test_phi_nonconvergence_raises():
    with pytest.raises(QuadratureError):
        spherical_phi(200.0, 30.0, GeometryParams(4), max_nodes=64)


def test_evaluator_matrix_agrees_with_quadrature():
    g = GeometryParams(3)
    lam = np.linspace(0, 20, 17)
    r = np.linspace(0.0, 6, 13)
    closed = SphericalEvaluator(g).matrix(lam, r)
    quad = SphericalEvaluator(g, closed_form=False).matrix(lam, r)
    assert np.max(np.abs(closed - quad)) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 5])
def test_phi_is_laplace_eigenfunction(n):
    g = GeometryParams(n)
    grid = RadialGrid.uniform(g, 6.0, 6000)
    lam = 1.7
    f = RadialFunction(grid, spherical_phi(lam, grid.nodes, g))
    lap = laplace_beltrami_radial(f).values
    interior = slice(50, -50)
    res = lap[interior] + (lam ** 2 + g.rho ** 2) * f.values[interior]
    assert np.max(np.abs(res)) / np.max(np.abs(f.values[interior])) < 1e-5
