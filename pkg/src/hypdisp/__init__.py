"""Harmonic analysis, dispersive kernels and mild solutions on real hyperbolic space."""
from .specfun import (GeometryParams, PlancherelDensity, QuadratureError, SphericalEvaluator,
                      gamma_complex, plancherel_density, spherical_phi)
from .transform import (RadialFunction, RadialGrid, SpectralFunction, SpectralGrid,
                        TransformPlan, forward, inverse, make_plan)
from .oscillatory import KernelResult, kernel_I, kernel_profile, psi
from .lorentz import LorentzParams, lorentz_from_samples, lorentz_norm_monotone
from .groups import PairState, apply_boussinesq_group
from .solver import (SolverParams, Trajectory, exponents, picard_solve, scattering_state,
                     stability_experiment)

__version__ = "0.1.0"
