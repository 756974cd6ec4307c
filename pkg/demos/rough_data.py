"""
Infinite-energy data
====================

A profile that behaves like r^{-9/4} at the origin lies in weak L^{4/3}
but not in L^2 near the origin.  Refining the grid at the center shows
both facts numerically.
"""

import math

from hypdisp import GeometryParams
from hypdisp.solver import RoughDataSpec, make_rough_data, rough_data_diagnostics
from hypdisp.transform import make_plan

g = GeometryParams(3)
spec = RoughDataSpec(g, b=3.0)

rep = rough_data_diagnostics(spec, doublings=4)
for rm, w, l2 in zip(rep.r_min, rep.weak_norms, rep.local_l2):
    print(f"r_min = {rm:.2e}   weak norm = {w:.5f}   L2(ball) = {l2:.4e}")
print("growth per halving of r_min", rep.growth, "expected", 2 ** 0.75)

# f* is constant on the unit ball, so the weak norm is vol(B_1)^{3/4}
vol = 2 * math.pi * (math.sinh(1) * math.cosh(1) - 1)
print("vol(B_1)^{3/4}", vol ** 0.75)

# the data as a spectral pair, ready for the solver
plan = make_plan(g, r_max=20.0, n_r=512, lam_max=12.0, n_lam=1024)
state = make_rough_data(spec, plan)
print("spectral samples", state.u_hat.values[:4])
