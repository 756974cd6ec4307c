import math
import warnings

import numpy as np
import pytest

from hypdisp.groups import (MultiplierSymbol, PairState, apply_boussinesq_group,
                            apply_multiplier, apply_prototype_group, default_probes,
                            dispersive_scan, group_ratio, l1_operator, l2_operator, physical,
                            rotate, small_time_ratio, x_norm, x_ratio)
from hypdisp.lorentz import lorentz_from_samples
from hypdisp.oscillatory import psi
from hypdisp.quadrature import loglog_slope
from hypdisp.specfun import GeometryParams
from hypdisp.transform import (GridMismatchError, RadialFunction, SpectralFunction, forward,
                               inverse, laplace_beltrami_radial, make_plan)

from test_transform import uniform_plan


def random_state(grid, rng):
    return PairState.from_arrays(grid, rng.standard_normal(grid.size),
                                 rng.standard_normal(grid.size))


def close(a, b, tol=1e-12):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b)) <= tol * max(1.0, np.max(np.abs(b)))


# --- symbols -------------------------------------------------------------------

def test_unknown_symbol():
    with pytest.raises(ValueError):
        MultiplierSymbol("bogus")


def test_symbols_bounded_near_zero(h3):
    lam = np.linspace(0, 1, 11)
    for kind in ("sin_tpsi_g2", "sin_tpsi_g3", "q_ratio"):
        assert np.all(np.isfinite(MultiplierSymbol(kind, 1.0)(lam, h3)))


def test_q_equals_lambda_over_j(plan3):
    lam, g = plan3.sgrid.nodes, plan3.geometry
    q = MultiplierSymbol("q_ratio")(lam, g)
    lj = MultiplierSymbol("lambda_power", 1.0)(lam, g) * MultiplierSymbol("j_power", -1.0)(lam, g)
    assert np.max(np.abs(q - lj)) <= 1e-14


def test_j0_is_identity(plan3, rng):
    f = SpectralFunction(plan3.sgrid, rng.standard_normal(plan3.sgrid.size))
    assert np.array_equal(apply_multiplier(MultiplierSymbol("j_power", 0.0), f).values, f.values)


def test_lambda_squared_is_minus_laplacian(h3):
    plan = uniform_plan(h3)
    f = RadialFunction(plan.rgrid, np.exp(-plan.rgrid.nodes ** 2))
    via_symbol = inverse(apply_multiplier(MultiplierSymbol("lambda_power", 2.0),
                                          forward(f, plan)), plan).values
    via_fd = -laplace_beltrami_radial(f).values
    r = plan.rgrid.nodes
    interior = (r > 0.1) & (r < 3)
    scale = np.max(np.abs(via_fd[interior]))
    assert np.max(np.abs(via_symbol - via_fd)[interior]) / scale < 1e-3


# --- prototype group -------------------------------------------------------------

def test_prototype_group_identity_law_isometry(plan3, rng):
    z = SpectralFunction(plan3.sgrid, rng.standard_normal(plan3.sgrid.size)
                         + 1j * rng.standard_normal(plan3.sgrid.size))
    assert close(apply_prototype_group(z, 0.0).values, z.values, 0.0)
    a = apply_prototype_group(apply_prototype_group(z, 0.7), 1.9).values
    assert close(a, apply_prototype_group(z, 2.6).values)
    w = plan3.sgrid.weights
    n0 = np.sum(np.abs(z.values) ** 2 * w)
    n1 = np.sum(np.abs(apply_prototype_group(z, 13.0).values) ** 2 * w)
    assert n1 == pytest.approx(n0, rel=1e-12)


# --- Boussinesq group ---------------------------------------------------------------

def test_boussinesq_identity_and_composition(plan3, rng):
    s = random_state(plan3.sgrid, rng)
    g0 = apply_boussinesq_group(s, 0.0)
    assert np.array_equal(g0.u_hat.values, s.u_hat.values)
    assert np.array_equal(g0.w_hat.values, s.w_hat.values)
    for t1, t2 in [(0.3, 1.1), (-2.0, 0.5), (0.05, -0.7)]:
        a = apply_boussinesq_group(apply_boussinesq_group(s, t2), t1)
        b = apply_boussinesq_group(s, t1 + t2)
        assert close(a.u_hat.values, b.u_hat.values)
        assert close(a.w_hat.values, b.w_hat.values)


def test_boussinesq_composition_large_times(plan3, rng):
    # angles reach ~2e4 rad here, so rounding of t * psi alone is ~1e-12
    s = random_state(plan3.sgrid, rng)
    t1, t2 = 40.0, -17.0
    a = apply_boussinesq_group(apply_boussinesq_group(s, t2), t1)
    b = apply_boussinesq_group(s, t1 + t2)
    max_angle = 57.0 * psi(plan3.sgrid.lam_max, plan3.geometry)
    tol = 16 * np.finfo(float).eps * max_angle
    assert close(a.u_hat.values, b.u_hat.values, tol)
    assert close(a.w_hat.values, b.w_hat.values, tol)


def test_boussinesq_preserves_pointwise_energy(plan3, rng):
    s = random_state(plan3.sgrid, rng)
    e0 = s.u_hat.values ** 2 + s.w_hat.values ** 2
    st = apply_boussinesq_group(s, 7.3)
    e1 = st.u_hat.values ** 2 + st.w_hat.values ** 2
    assert close(e1, e0)


def test_first_component_is_cosine_average(plan3, rng):
    phi = SpectralFunction(plan3.sgrid, rng.standard_normal(plan3.sgrid.size))
    t = 2.4
    st = apply_boussinesq_group(PairState(phi, phi * 0.0), t)
    avg = 0.5 * (apply_prototype_group(phi, t).values + apply_prototype_group(phi, -t).values)
    assert close(st.u_hat.values, avg.real)
    assert np.max(np.abs(avg.imag)) < 1e-12
    assert close(l1_operator(phi, t).values, st.u_hat.values)


def test_sine_multiplier_relation(plan3, rng):
    phi = SpectralFunction(plan3.sgrid, rng.standard_normal(plan3.sgrid.size))
    t = -3.1
    rel = (apply_prototype_group(phi, -t).values - apply_prototype_group(phi, t).values) / 2j
    assert close(l2_operator(phi, t).values, rel.real)
    assert np.max(np.abs(rel.imag)) < 1e-12


def test_rotation_matches_uv_symbol_matrix(plan3, rng):
    grid = plan3.sgrid
    u = SpectralFunction(grid, rng.standard_normal(grid.size))
    v = SpectralFunction(grid, rng.standard_normal(grid.size))
    t = 1.7
    st = apply_boussinesq_group(PairState.from_uv(u, v), t)
    g1 = MultiplierSymbol("cos_tpsi", t)(grid.nodes, grid.geometry)
    g2 = MultiplierSymbol("sin_tpsi_g2", t)(grid.nodes, grid.geometry)
    g3 = MultiplierSymbol("sin_tpsi_g3", t)(grid.nodes, grid.geometry)
    assert close(st.u_hat.values, g1 * u.values + g2 * v.values)
    assert close(st.v_hat().values, g3 * u.values + g1 * v.values)


def test_rotate_helper():
    u, w = rotate(1.0, 0.0, math.pi / 2)
    assert u == pytest.approx(0.0, abs=1e-16) and w == pytest.approx(1.0)


def test_pair_state_validation(plan3, small_plan3):
    a = SpectralFunction(plan3.sgrid, np.zeros(plan3.sgrid.size))
    b = SpectralFunction(small_plan3.sgrid, np.zeros(small_plan3.sgrid.size))
    with pytest.raises(GridMismatchError):
        PairState(a, b)
    with pytest.raises(GridMismatchError):
        physical(PairState(b, b), plan3)


def test_pair_state_arithmetic(plan3, rng):
    s = random_state(plan3.sgrid, rng)
    d = (2 * s - s) + PairState.zeros(plan3.sgrid)
    assert close(d.u_hat.values, s.u_hat.values)
    assert close(d.w_hat.values, s.w_hat.values)


# --- X norm -----------------------------------------------------------------------

def test_x_norm_first_component_only(plan3):
    r = plan3.rgrid.nodes
    f = np.exp(-r ** 2)
    fhat = forward(f, plan3)
    st = PairState(fhat, fhat * 0.0)
    direct = lorentz_from_samples(inverse(fhat, plan3).values, plan3.rgrid.measure, 4, math.inf,
                                  warn=False)
    assert x_norm(st, 4, math.inf, plan3).value == pytest.approx(direct, rel=1e-14)
    assert x_norm(st * -3.0, 4, math.inf, plan3).value == pytest.approx(3 * direct, rel=1e-12)


def test_x_norm_constructed_second_component(plan3):
    r = plan3.rgrid.nodes
    f = np.exp(-r ** 2)
    g = 3 * np.exp(-r ** 2 / 2) * (1 + r)
    q = MultiplierSymbol("q_ratio")
    # choose v so that w = Q v equals g
    v_hat = apply_multiplier(MultiplierSymbol("j_power", 1.0),
                             apply_multiplier(MultiplierSymbol("lambda_power", -1.0),
                                              forward(g, plan3)))
    st = PairState.from_uv(forward(f, plan3), v_hat)
    assert close(st.w_hat.values, apply_multiplier(q, v_hat).values)
    meas = plan3.rgrid.measure
    nf = lorentz_from_samples(f, meas, 4, 2, warn=False)
    ng = lorentz_from_samples(g, meas, 4, 2, warn=False)
    assert x_norm(st, 4, 2, plan3).value == pytest.approx(max(nf, ng), rel=1e-5)


# --- dispersive scans ------------------------------------------------------------------

@pytest.fixture(scope="module")
def wide_plan():
    g = GeometryParams(3)
    return make_plan(g, r_max=20.0, n_r=512, lam_segments=((3.0, 2048), (6.0, 1024), (12.0, 1024)))


def test_scan_time_reversal(wide_plan):
    probes = default_probes(wide_plan.rgrid.nodes)
    for t in (0.5, 20.0):
        assert group_ratio(probes[0], t, 4, wide_plan) == pytest.approx(
            group_ratio(probes[0], -t, 4, wide_plan), rel=1e-10)
        assert x_ratio(probes[1], t, 4, wide_plan) == pytest.approx(
            x_ratio(probes[1], -t, 4, wide_plan), rel=1e-10)


def test_scan_structure(wide_plan):
    rep = dispersive_scan(4, [10.0, 20.0, 40.0], wide_plan, kernel=False)
    assert set(rep["slopes"]) == {"group_ratio", "x_ratio"}
    assert all(rw["group_ratio"] > 0 for rw in rep["rows"])
    with pytest.raises(ValueError):
        dispersive_scan(2, [1.0], wide_plan)
    with pytest.raises(ValueError):
        dispersive_scan(4, [], wide_plan)


def test_lorentz_index_does_not_change_decay_rate(wide_plan):
    t = np.geomspace(10, 100, 6)
    probe = default_probes(wide_plan.rgrid.nodes)[0]
    slopes = {}
    for d in (1.0, 2.0, math.inf):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            slopes[d] = loglog_slope(t, [group_ratio(probe, ti, 4, wide_plan, d=d) for ti in t])
    assert abs(slopes[1.0] - slopes[math.inf]) <= 0.1
    assert abs(slopes[2.0] - slopes[math.inf]) <= 0.1


def test_small_time_ratio_reports_best_width():
    g = GeometryParams(3)
    plan = make_plan(g, r_max=10.0, n_r=1024, lam_max=160.0, n_lam=2048)
    a = small_time_ratio(0.02, 4, plan)
    b = small_time_ratio(0.08, 4, plan)
    assert a["c"] is not None and a["ratio"] > b["ratio"] > 0
