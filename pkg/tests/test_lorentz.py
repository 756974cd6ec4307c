import math

import numpy as np
import pytest
from scipy import integrate

from hypdisp.lorentz import (ExponentError, LorentzParams, NotMonotoneError, holder_check,
                             lorentz_from_samples, lorentz_norm_monotone,
                             lorentz_norm_rearranged, lq_norm_exact, lq_norm_radial, rearrangement)
from hypdisp.specfun import GeometryParams
from hypdisp.transform import RadialFunction, RadialGrid


@pytest.fixture(scope="module")
def grid():
    return RadialGrid.gauss(GeometryParams(3), 20.0, 1024)


def sample(grid, func):
    return RadialFunction(grid, func(grid.nodes))


def decaying(grid):
    return sample(grid, lambda r: np.exp(-r))


def ball_volume_h3(R):
    return 2 * math.pi * (math.sinh(R) * math.cosh(R) - R)


def test_params_validation():
    with pytest.raises(ValueError):
        LorentzParams(1.0, 2.0)
    with pytest.raises(ValueError):
        LorentzParams(2.0, 0.5)
    assert LorentzParams(4.0, 2.0).conjugate == pytest.approx(4.0 / 3.0)
    assert LorentzParams(math.inf, math.inf).conjugate == 1.0


# --- L^q ----------------------------------------------------------------------

def test_lq_zero_and_homogeneous(grid):
    assert lq_norm_radial(sample(grid, np.zeros_like), 2).value == 0.0
    f = sample(grid, lambda r: np.exp(-2 * r))
    a = lq_norm_radial(f, 3).value
    assert lq_norm_radial(-3 * f, 3).value == pytest.approx(3 * a, rel=1e-12)


def test_lq_two_piece_equivalent_to_exact(grid):
    f = sample(grid, lambda r: np.exp(-2 * r))
    two_piece = lq_norm_radial(f, 2).value
    # 4 pi int exp(-4r) sinh^2 r dr = 4 pi / 24
    exact = math.sqrt(math.pi / 6)
    quad = integrate.quad(lambda r: math.exp(-4 * r) * math.sinh(r) ** 2, 0, 20)[0]
    assert quad == pytest.approx(1 / 24, rel=1e-10)
    assert lq_norm_exact(f, 2) == pytest.approx(exact, rel=1e-8)
    assert 0.25 <= two_piece / exact <= 4


def test_lq_flags_divergent_tail():
    g = GeometryParams(3)
    res = lq_norm_radial(lambda r: np.exp(-0.5 * r), 2, g, r_max=20.0)
    assert res.diverging


def test_lq_sup(grid):
    f = sample(grid, lambda r: np.exp(-(r - 1) ** 2))
    assert lq_norm_radial(f, math.inf).value == pytest.approx(1.0, abs=1e-6)


# --- monotone formula -----------------------------------------------------------

def test_monotone_weak_type_direct_evaluation(grid):
    res = lorentz_norm_monotone(decaying(grid), LorentzParams(4, math.inf))
    ref = 0.75 ** 0.75 * math.exp(-0.75) + math.exp(-0.5)
    assert res.value == pytest.approx(ref, rel=1e-6)
    assert res.method == "monotone-formula"


def test_monotone_zero_homogeneous_and_guard(grid):
    lp = LorentzParams(4, 2)
    assert lorentz_norm_monotone(sample(grid, np.zeros_like), lp).value == 0.0
    a = lorentz_norm_monotone(decaying(grid), lp).value
    assert lorentz_norm_monotone(5 * decaying(grid), lp).value == pytest.approx(5 * a, rel=1e-12)
    with pytest.raises(NotMonotoneError):
        lorentz_norm_monotone(sample(grid, lambda r: np.sin(r) * np.exp(-r)), lp)


# --- rearrangement -----------------------------------------------------------------

def test_rearrangement_is_sorted():
    levels, cum = rearrangement([1.0, -3.0, 2.0], [1.0, 2.0, 4.0])
    assert np.array_equal(levels, [3.0, 2.0, 1.0])
    assert np.array_equal(cum, [2.0, 6.0, 7.0])


@pytest.mark.parametrize("p", [2.0, 4.0, 4.0 / 3.0])
def test_indicator_of_ball(p):
    g = GeometryParams(3)
    grid = RadialGrid.uniform(g, 4.0, 20000)
    R = 1.5
    f = sample(grid, lambda r: (r <= R).astype(float))
    with pytest.warns(RuntimeWarning, match="64 distinct"):
        val = lorentz_norm_rearranged(f, LorentzParams(p, math.inf)).value
    counted = float(np.sum(grid.measure[grid.nodes <= R]))
    assert val == pytest.approx(counted ** (1 / p), rel=1e-14)
    assert val == pytest.approx(ball_volume_h3(R) ** (1 / p), rel=1e-3)


@pytest.mark.parametrize("p,d", [(3, 1), (4, 2), (4, math.inf)])
def test_rearranged_equivalent_to_monotone(grid, p, d):
    f = decaying(grid)
    a = lorentz_norm_rearranged(f, LorentzParams(p, d)).value
    b = lorentz_norm_monotone(f, LorentzParams(p, d)).value
    assert 1 / 8 <= a / b <= 8


@pytest.mark.parametrize("q", [2.0, 3.0, 4.0])
def test_diagonal_lorentz_is_lq(grid, q):
    f = sample(grid, lambda r: np.exp(-r) * (1 + r))
    diag = lorentz_norm_rearranged(f, LorentzParams(q, q)).value
    assert diag == pytest.approx(lq_norm_exact(f, q), rel=1e-4)
    assert 1 / 8 <= diag / lq_norm_radial(f, q).value <= 8


def test_rearranged_ignores_sign_and_scales(grid):
    f = sample(grid, lambda r: np.cos(3 * r) * np.exp(-r))
    lp = LorentzParams(3, 2)
    a = lorentz_norm_rearranged(f, lp).value
    assert lorentz_norm_rearranged(-2 * f, lp).value == pytest.approx(2 * a, rel=1e-12)


def test_zero_samples_give_zero():
    assert lorentz_from_samples(np.zeros(100), np.ones(100), 3, 2, warn=False) == 0.0


PROFILE_FAMILY = [
    lambda r: np.exp(-r), lambda r: np.exp(-2 * r), lambda r: np.exp(-r ** 2),
    lambda r: 1 / np.cosh(r) ** 3, lambda r: np.exp(-r) * (1 + r),
    lambda r: np.exp(-0.8 * r) * np.cos(r) ** 2, lambda r: np.exp(-(r - 2) ** 2),
    lambda r: 1 / (1 + r ** 2) * np.exp(-r), lambda r: np.exp(-3 * r) + 0.1 * np.exp(-r),
    lambda r: np.sin(2 * r) * np.exp(-1.2 * r),
]


def test_inclusion_chain(grid):
    p = 4.0
    c_inf = (p / p) ** (1 / p)          # (p,p) -> (p,inf)
    c_one = (1 / p) ** (1 - 1 / p)      # (p,1) -> (p,p)
    for func in PROFILE_FAMILY:
        f = sample(grid, func)
        w = lorentz_norm_rearranged(f, LorentzParams(p, math.inf)).value
        s = lorentz_norm_rearranged(f, LorentzParams(p, p)).value
        o = lorentz_norm_rearranged(f, LorentzParams(p, 1)).value
        assert w <= c_inf * s * (1 + 1e-12)
        assert s <= c_one * o * (1 + 1e-12)


@pytest.mark.parametrize("p,d", [(4, 2), (3, math.inf), (4, 1)])
def test_quasi_triangle(grid, p, d):
    bound = 2 ** (1 / min(p, d) + 1)
    lp = LorentzParams(p, d)
    for fa, fb in zip(PROFILE_FAMILY, PROFILE_FAMILY[1:]):
        f, g = sample(grid, fa), sample(grid, fb)
        lhs = lorentz_norm_rearranged(f + g, lp).value
        rhs = lorentz_norm_rearranged(f, lp).value + lorentz_norm_rearranged(g, lp).value
        assert lhs <= bound * rhs


# --- Hölder --------------------------------------------------------------------------

def test_holder_ratio_stable_under_refinement():
    g = GeometryParams(3)
    ratios = []
    for n_r in (512, 1024):
        grid = RadialGrid.gauss(g, 20.0, n_r)
        f = decaying(grid)
        out = holder_check(f, f, 4, 2, 4, 2)
        assert out["p3"] == pytest.approx(2.0)
        assert out["d3"] == 1.0
        ratios.append(out["ratio"])
    assert abs(ratios[1] - ratios[0]) / ratios[0] < 0.2
    assert ratios[0] <= 2 ** (1 / 2)


def test_holder_zero_and_symmetry(grid):
    f = decaying(grid)
    g = sample(grid, lambda r: np.exp(-r ** 2))
    zero = holder_check(sample(grid, np.zeros_like), g, 4, 2, 4, 2)
    assert zero["lhs"] == 0.0 <= zero["rhs"]
    a = holder_check(f, g, 4, 2, 4, 2)
    b = holder_check(g, f, 4, 2, 4, 2)
    assert a["lhs"] == pytest.approx(b["lhs"], rel=1e-14)
    assert a["rhs"] == pytest.approx(b["rhs"], rel=1e-14)


def test_holder_exponent_errors(grid):
    f = decaying(grid)
    with pytest.raises(ExponentError):
        holder_check(f, f, 2, 2, 2, 2)
    with pytest.raises(ExponentError):
        holder_check(f, f, 4, 4, 4, 4, d3=1.0)
