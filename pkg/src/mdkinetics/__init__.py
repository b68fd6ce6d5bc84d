"""mdkinetics: multi-scale simulation of a four-population cell-dynamics model.

A stochastic particle engine for the kinetic system, a structure-preserving
solver for its mean-field Fokker-Planck limit, closed moment-ODE integrators,
and analytics verifying convergence to inverse-Gamma equilibria.
"""

from .params import ParameterSet, MomentState, ValidationReport, POPULATIONS, validate, scaled
from .moments import means_rhs, variances_rhs, integrate, equilibrium, EquilibriumSummary
from .equilibria import (InverseGammaSpec, quasi_equilibrium, inverse_gamma_pdf,
                         equilibrium_specs, stationary_residual)
from .metrics import (energy_distance, hminus_p_norm, decay_envelope,
                      equivalence_constant, gronwall_constant)
from .dsmc import (ParticleEnsemble, init_ensemble, step, run, estimate_moments,
                   to_histogram, Histogram, expected_moment_change)
from .fokker_planck import (GridDensity, DriftDiffusion, drift_diffusion_all,
                            flux_coefficients, step_population, evolve_system,
                            discrete_equilibrium, uniform_bump)

__version__ = "0.1.0"

__all__ = [
    "ParameterSet", "MomentState", "ValidationReport", "POPULATIONS",
    "validate", "scaled",
    "means_rhs", "variances_rhs", "integrate", "equilibrium", "EquilibriumSummary",
    "InverseGammaSpec", "quasi_equilibrium", "inverse_gamma_pdf",
    "equilibrium_specs", "stationary_residual",
    "energy_distance", "hminus_p_norm", "decay_envelope",
    "equivalence_constant", "gronwall_constant",
    "ParticleEnsemble", "init_ensemble", "step", "run", "estimate_moments",
    "to_histogram", "Histogram", "expected_moment_change",
    "GridDensity", "DriftDiffusion", "drift_diffusion_all", "flux_coefficients",
    "step_population", "evolve_system", "discrete_equilibrium", "uniform_bump",
    "__version__",
]
