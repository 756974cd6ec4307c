import numpy as np
import pytest

from hypdisp.quadrature import (GK15_NODES, GK15_WEIGHTS, G7_WEIGHTS, composite_gauss,
                                gauss_legendre, gk15_panels, integration_matrix, loglog_slope)


@pytest.mark.parametrize("m", [5, 32, 64])
def test_gauss_legendre_exact_for_polynomials(m):
    x, w = gauss_legendre(m, 0.0, 2.0)
    for k in range(2 * m):
        assert np.sum(w * x ** k) == pytest.approx(2.0 ** (k + 1) / (k + 1), rel=1e-12)


def test_composite_rule_for_many_nodes():
    x, w = gauss_legendre(4096, 0.0, 3.0)
    assert x.size == 4096
    assert np.all(np.diff(x) > 0)
    assert np.sum(w * np.exp(x)) == pytest.approx(np.expm1(3.0), rel=1e-14)


def test_composite_gauss_panels():
    x, w = composite_gauss([0.0, 1.0, 3.0], order=8)
    assert np.sum(w * np.cos(x)) == pytest.approx(np.sin(3.0), rel=1e-13)


def test_gk15_exactness():
    # Kronrod 15 is exact to degree 22, the embedded Gauss 7 to degree 13
    for k in range(23):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(GK15_WEIGHTS * GK15_NODES ** k) == pytest.approx(exact, abs=1e-14)
    for k in range(14):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert np.sum(G7_WEIGHTS * GK15_NODES ** k) == pytest.approx(exact, abs=1e-14)


def test_gk15_panels_shapes_and_values():
    nodes, wk, wg = gk15_panels(np.linspace(0, np.pi, 5))
    assert nodes.shape == wk.shape == wg.shape == (4, 15)
    assert np.sum(wk * np.sin(nodes)) == pytest.approx(2.0, rel=1e-14)


def test_integration_matrix_running_integral():
    m = 24
    x, _ = gauss_legendre(m)
    S = integration_matrix(m)
    got = S @ np.cos(x)
    assert np.max(np.abs(got - (np.sin(x) - np.sin(-1.0)))) < 1e-14


def test_loglog_slope():
    t = np.geomspace(1, 100, 9)
    assert loglog_slope(t, 3 * t ** -1.5) == pytest.approx(-1.5, abs=1e-12)
