"""Model parameters, population labels, and validation.

The model couples four cell populations: normal muscle cells (N), damaged
cells (D), macrophages (M), and cytotoxic T lymphocytes (C).  Every other
module consumes the :class:`ParameterSet` defined here.

Convention: noise amplitudes are configured as variances ``sigma2_J``
(default 0.01 per population).  All rates are dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

#: Population labels, in canonical order. All per-population arrays use this order.
POPULATIONS = ("N", "D", "M", "C")

#: Indices into per-population arrays.
N_, D_, M_, C_ = 0, 1, 2, 3


@dataclass(frozen=True)
class ParameterSet:
    """All model constants. Immutable; safe to share across workers.

    Rates ``beta_J`` and ``gamma_M``, ``gamma_C`` must be positive,
    ``nu_control >= 0`` is the therapy efficacy acting on the C population,
    and ``epsilon`` in (0, 1] records the interaction-strength scaling.
    """

    beta_N: float = 0.2
    beta_D: float = 0.1
    beta_M: float = 0.2
    beta_C: float = 0.1
    sigma2_N: float = 0.01
    sigma2_D: float = 0.01
    sigma2_M: float = 0.01
    sigma2_C: float = 0.01
    gamma_M: float = 0.05
    gamma_C: float = 0.05
    nu_control: float = 0.0
    epsilon: float = 1.0

    @property
    def beta(self) -> np.ndarray:
        return np.array([self.beta_N, self.beta_D, self.beta_M, self.beta_C])

    @property
    def sigma2(self) -> np.ndarray:
        return np.array([self.sigma2_N, self.sigma2_D, self.sigma2_M, self.sigma2_C])

    @property
    def variances_finite(self) -> bool:
        """True when sigma_J^2 < 2 beta_J for every population.

        Variance-equilibrium operations refuse parameter sets violating this.
        For the C population the therapy rate strengthens the contraction, so
        the uncontrolled condition is the binding one.
        """
        return bool(np.all(self.sigma2 < 2.0 * self.beta))


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`: one message per violated constraint."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


def validate(params: ParameterSet) -> ValidationReport:
    """Check every parameter constraint and report all violations.

    Reporting, not failing: an invalid set is constructible, but modules
    that need a constraint re-check it and raise.
    """
    v: list[str] = []
    for name in ("beta_N", "beta_D", "beta_M", "beta_C", "gamma_M", "gamma_C"):
        if getattr(params, name) <= 0:
            v.append(f"{name} must be positive")
    for name in ("sigma2_N", "sigma2_D", "sigma2_M", "sigma2_C"):
        if getattr(params, name) < 0:
            v.append(f"{name} must be nonnegative")
    if params.nu_control < 0:
        v.append("nu_control must be nonnegative")
    if not (0.0 < params.epsilon <= 1.0):
        v.append("epsilon must lie in (0, 1]")
    for label in POPULATIONS:
        s2 = getattr(params, f"sigma2_{label}")
        b = getattr(params, f"beta_{label}")
        if b > 0 and s2 >= 2.0 * b:
            v.append(f"sigma_{label}^2 >= 2*beta_{label} (variances do not equilibrate)")
    return ValidationReport(v)


def scaled(params: ParameterSet, epsilon: float) -> ParameterSet:
    """Return a copy with all interaction rates and noise variances scaled by epsilon.

    beta_J -> eps*beta_J, sigma_J^2 -> eps*sigma_J^2, gamma -> eps*gamma,
    nu_control -> eps*nu_control.  Scaling is multiplicative, so
    ``scaled(scaled(p, a), b) == scaled(p, a*b)``, and it preserves every
    validity constraint.
    """
    if not (0.0 < epsilon <= 1.0):
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    return replace(
        params,
        beta_N=params.beta_N * epsilon,
        beta_D=params.beta_D * epsilon,
        beta_M=params.beta_M * epsilon,
        beta_C=params.beta_C * epsilon,
        sigma2_N=params.sigma2_N * epsilon,
        sigma2_D=params.sigma2_D * epsilon,
        sigma2_M=params.sigma2_M * epsilon,
        sigma2_C=params.sigma2_C * epsilon,
        gamma_M=params.gamma_M * epsilon,
        gamma_C=params.gamma_C * epsilon,
        nu_control=params.nu_control * epsilon,
        epsilon=params.epsilon * epsilon,
    )


@dataclass
class MomentState:
    """Means and variances of the four populations at one time point.

    ``m`` and ``v`` are length-4 arrays in :data:`POPULATIONS` order.
    """

    t: float
    m: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.m.shape != (4,) or self.v.shape != (4,):
            raise ValueError("MomentState needs one mean and one variance per population")

    @property
    def m_N(self) -> float:
        return float(self.m[N_])

    @property
    def m_D(self) -> float:
        return float(self.m[D_])

    @property
    def m_M(self) -> float:
        return float(self.m[M_])

    @property
    def m_C(self) -> float:
        return float(self.m[C_])
