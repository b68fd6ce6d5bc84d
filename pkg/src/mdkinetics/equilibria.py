"""Inverse-Gamma quasi-equilibria of the mean-field model.

Freezing the drift-diffusion coefficients of each population at the current
means makes the stationary density an inverse-Gamma law with constant shape
``nu_J = 1 + 2 beta_J / sigma_J^2`` and a scale ``omega_J(t)`` that follows the
mean trajectory.  As the means equilibrate the quasi-equilibria converge to
the fixed equilibrium densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, gammainc

from .params import ParameterSet, MomentState, POPULATIONS


@dataclass(frozen=True)
class InverseGammaSpec:
    """Shape/scale pair of an inverse-Gamma density f(x) ~ x^-(nu+1) exp(-omega/x)."""

    nu: float
    omega: float

    def __post_init__(self):
        if self.nu <= 1:
            raise ValueError("shape nu must exceed 1 (finite mean)")
        if self.omega <= 0:
            raise ValueError("scale omega must be positive")

    @property
    def mean(self) -> float:
        return self.omega / (self.nu - 1.0)

    @property
    def variance(self) -> float:
        if self.nu <= 2:
            raise ValueError("variance requires nu > 2")
        return self.omega**2 / ((self.nu - 1.0) ** 2 * (self.nu - 2.0))

    @property
    def mode(self) -> float:
        return self.omega / (self.nu + 1.0)

    def tail_mass(self, L: float) -> float:
        """Probability mass beyond L (monitors domain-truncation error)."""
        return float(gammainc(self.nu, self.omega / L))


def shape_parameters(params: ParameterSet) -> np.ndarray:
    """nu_J = 1 + 2 beta_J / sigma_J^2 per population (beta_C + nu under control)."""
    beta = params.beta.copy()
    beta[3] += params.nu_control
    return 1.0 + 2.0 * beta / params.sigma2


def scale_parameters(moments: MomentState, params: ParameterSet) -> np.ndarray:
    """Time-dependent scales omega_J at the given means.

    omega_N = 2 beta_D m_M m_D / (sigma_N^2 m_C),
    omega_D = 2 beta_N m_N m_C / (sigma_D^2 m_M),
    omega_M = 2 gamma_M m_D / sigma_M^2,
    omega_C = 2 gamma_C m_M / sigma_C^2.
    """
    mN, mD, mM, mC = moments.m
    if mC <= 0 or mM <= 0:
        raise ValueError("quasi-equilibrium scales need positive driving means m_C and m_M")
    return np.array([
        2.0 * params.beta_D * mM * mD / (params.sigma2_N * mC),
        2.0 * params.beta_N * mN * mC / (params.sigma2_D * mM),
        2.0 * params.gamma_M * mD / params.sigma2_M,
        2.0 * params.gamma_C * mM / params.sigma2_C,
    ])


def quasi_equilibrium(population: str, moments: MomentState,
                      params: ParameterSet) -> InverseGammaSpec:
    """Inverse-Gamma spec of one population's quasi-equilibrium at given means."""
    i = POPULATIONS.index(population)
    return InverseGammaSpec(nu=float(shape_parameters(params)[i]),
                            omega=float(scale_parameters(moments, params)[i]))


def inverse_gamma_pdf(spec: InverseGammaSpec, x) -> np.ndarray | float:
    """Pointwise density, evaluated in log space (stable for large shapes).

    Zero for x <= 0 by convention (the support is the open half line).
    """
    x_arr = np.asarray(x, dtype=float)
    out = np.zeros_like(x_arr)
    pos = x_arr > 0
    xp = x_arr[pos]
    log_pdf = (spec.nu * np.log(spec.omega) - gammaln(spec.nu)
               - (spec.nu + 1.0) * np.log(xp) - spec.omega / xp)
    out[pos] = np.exp(log_pdf)
    return out if np.ndim(x) else float(out)


def inverse_gamma_pdf_derivative(spec: InverseGammaSpec, x) -> np.ndarray | float:
    """Analytic d/dx of the density: f'(x) = f(x) * (omega/x^2 - (nu+1)/x)."""
    x_arr = np.asarray(x, dtype=float)
    f = inverse_gamma_pdf(spec, x_arr)
    out = np.zeros_like(x_arr)
    pos = x_arr > 0
    out[pos] = np.asarray(f)[pos] * (spec.omega / x_arr[pos] ** 2 - (spec.nu + 1.0) / x_arr[pos])
    return out if np.ndim(x) else float(out)


def stationary_residual(spec: InverseGammaSpec, lam: float, mu: float, kappa: float,
                        x) -> np.ndarray | float:
    """Residual of the stationary flux operator applied to the density.

    Evaluates (lam*x - mu) f + (kappa/2) d/dx (x^2 f) pointwise.  For the
    matching spec (nu = 1 + 2 lam/kappa, omega = 2 mu/kappa) this vanishes
    identically; the numerical value measures only floating-point error.
    """
    x_arr = np.asarray(x, dtype=float)
    f = np.asarray(inverse_gamma_pdf(spec, x_arr))
    fp = np.asarray(inverse_gamma_pdf_derivative(spec, x_arr))
    res = (lam * x_arr - mu) * f + 0.5 * kappa * (2.0 * x_arr * f + x_arr**2 * fp)
    return res if np.ndim(x) else float(res)


def equilibrium_specs(params: ParameterSet, m0: float) -> dict[str, InverseGammaSpec]:
    """Inverse-Gamma specs of the long-time equilibrium densities per population."""
    from .moments import equilibrium

    eq = equilibrium(params, m0)
    state = MomentState(t=np.inf, m=eq.m, v=eq.v if eq.v is not None else np.zeros(4))
    om = scale_parameters(state, params)
    nus = shape_parameters(params)
    return {pop: InverseGammaSpec(nu=float(nus[i]), omega=float(om[i]))
            for i, pop in enumerate(POPULATIONS)}
