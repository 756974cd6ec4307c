"""
Spherical transform and kernel decay on H^3
===========================================

Build a transform plan, check the round trip, then measure how fast the
kernel of exp(-itP) decays in L^4 for large times.
"""

import numpy as np

from hypdisp import GeometryParams, make_plan
from hypdisp.lorentz import lq_norm_radial
from hypdisp.oscillatory import kernel_profile
from hypdisp.quadrature import loglog_slope
from hypdisp.transform import plancherel_error, roundtrip_error

g = GeometryParams(3)

# a calibrated plan: 512 radial and 512 spectral nodes
plan = make_plan(g, r_max=12.0, n_r=512, lam_max=24.0, n_lam=512)
print("inversion constant", plan.inverse_calibration, "analytic", plan.analytic_calibration)

r = plan.rgrid.nodes
f = np.cos(2 * r) * np.exp(-r ** 2 / 2)
print("round trip error", roundtrip_error(f, plan))
print("Plancherel error", plancherel_error(f, plan))

# the kernel I(t, r) as an eps -> 0 limit, sampled on a radial profile
t = np.geomspace(10, 100, 6)
norms = []
for ti in t:
    prof = lambda x: np.abs(kernel_profile(ti, x, g, 1e-8).value)
    norms.append(lq_norm_radial(prof, 4.0, g, 30.0).value)
    print(f"t = {ti:7.2f}   ||I(t)||_4 = {norms[-1]:.6e}")

# expect a slope close to -3/2
print("log-log slope", loglog_slope(t, norms))
