"""Closed moment systems: mean ODEs, mean-field variance ODEs, and equilibria.

The mean system conserves m_N + m_D exactly (the exchange terms are
antisymmetric), and for sigma_J^2 < 2 beta_J the variance system contracts
onto closed-form equilibria.  The therapy control ``nu_control`` enters the
C equations through beta_C -> beta_C + nu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParameterSet, MomentState, C_


def means_rhs(m: np.ndarray, params: ParameterSet) -> np.ndarray:
    """Time derivative of the four population means.

    d m_N = -beta_N m_N m_C + beta_D m_M m_D
    d m_D = -beta_D m_D m_M + beta_N m_N m_C
    d m_M = -beta_M m_M + gamma_M m_D
    d m_C = -(beta_C + nu) m_C + gamma_C m_M
    """
    mN, mD, mM, mC = m
    exch = params.beta_N * mN * mC - params.beta_D * mM * mD
    return np.array([
        -exch,
        exch,
        -params.beta_M * mM + params.gamma_M * mD,
        -(params.beta_C + params.nu_control) * mC + params.gamma_C * mM,
    ])


def variances_rhs(m: np.ndarray, v: np.ndarray, params: ParameterSet) -> np.ndarray:
    """Time derivative of the four mean-field variances.

    Per population: -(2 beta - sigma^2) * g(t) * [V - sigma^2 m^2 / (2 beta - sigma^2)]
    with driving mean g = m_C for N, m_M for D, and 1 for M and C.  With
    control, the C equation uses beta_C + nu in both factors (an extension
    following the same derivation as the uncontrolled case).
    """
    if not params.variances_finite:
        raise ValueError("variance dynamics require sigma_J^2 < 2*beta_J for all populations")
    mN, mD, mM, mC = m
    beta = params.beta.copy()
    beta[C_] += params.nu_control
    s2 = params.sigma2
    rate = 2.0 * beta - s2
    drive = np.array([mC, mM, 1.0, 1.0])
    v_target = s2 * m**2 / rate
    return -rate * drive * (v - v_target)


@dataclass
class EquilibriumSummary:
    """Closed-form equilibrium means and variances for a conserved mass m0.

    ``v`` is None when sigma_J^2 >= 2 beta_J for some population (the variance
    system has no finite equilibrium there).
    """

    m: np.ndarray
    v: np.ndarray | None
    valid_variances: bool


def equilibrium(params: ParameterSet, m0: float) -> EquilibriumSummary:
    """Equilibrium of the moment systems given m_N(0) + m_D(0) = m0.

    m_N^inf = beta_D (beta_C + nu) m0 / (beta_D (beta_C + nu) + beta_N gamma_C),
    m_D^inf = m0 - m_N^inf, m_M^inf = (gamma_M / beta_M) m_D^inf,
    m_C^inf = gamma_C m_M^inf / (beta_C + nu), and
    V_J^inf = sigma_J^2 (m_J^inf)^2 / (2 beta_J - sigma_J^2) with
    beta_C + nu in place of beta_C for the controlled C population.
    """
    if m0 <= 0:
        raise ValueError("conserved mass m0 must be positive")
    bC = params.beta_C + params.nu_control
    denom = params.beta_D * bC + params.beta_N * params.gamma_C
    mN = params.beta_D * bC * m0 / denom
    mD = m0 - mN
    mM = params.gamma_M / params.beta_M * mD
    mC = params.gamma_C * mM / bC
    m = np.array([mN, mD, mM, mC])
    if not params.variances_finite:
        return EquilibriumSummary(m=m, v=None, valid_variances=False)
    beta = params.beta.copy()
    beta[C_] += params.nu_control
    v = params.sigma2 * m**2 / (2.0 * beta - params.sigma2)
    return EquilibriumSummary(m=m, v=v, valid_variances=True)


def _rhs8_scalar(y, bN, bD, bM, bC, s2N, s2D, s2M, s2C, gM, gC, nu):
    """Fused scalar right-hand side of the coupled 8-component moment system.

    Same formulas as means_rhs/variances_rhs; scalar arithmetic keeps the
    fixed-step integrator fast enough for tight runtime budgets.
    """
    mN, mD, mM, mC, vN, vD, vM, vC = y
    exch = bN * mN * mC - bD * mM * mD
    bCc = bC + nu
    rN = 2.0 * bN - s2N
    rD = 2.0 * bD - s2D
    rM = 2.0 * bM - s2M
    rC = 2.0 * bCc - s2C
    return (-exch, exch,
            -bM * mM + gM * mD,
            -bCc * mC + gC * mM,
            -rN * mC * (vN - s2N * mN * mN / rN),
            -rD * mM * (vD - s2D * mD * mD / rD),
            -rM * (vM - s2M * mM * mM / rM),
            -rC * (vC - s2C * mC * mC / rC))


def integrate(state: MomentState, params: ParameterSet, horizon: float,
              dt: float = 1e-2, report_dt: float | None = None) -> list[MomentState]:
    """Integrate the coupled 8-component moment system with fixed-step RK4.

    Returns the trajectory sampled every ``report_dt`` (default: every step).
    Raises if any mean leaves the positive orthant, which signals a too-large
    step size.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not params.variances_finite:
        raise ValueError("variance dynamics require sigma_J^2 < 2*beta_J for all populations")
    n_steps = int(round(horizon / dt))
    stride = 1 if report_dt is None else max(1, int(round(report_dt / dt)))
    args = (params.beta_N, params.beta_D, params.beta_M, params.beta_C,
            params.sigma2_N, params.sigma2_D, params.sigma2_M, params.sigma2_C,
            params.gamma_M, params.gamma_C, params.nu_control)
    y = tuple(float(v) for v in np.concatenate([state.m, state.v]))
    t = state.t
    out = [MomentState(t=t, m=np.array(y[:4]), v=np.array(y[4:]))]
    sixth = dt / 6.0
    half = dt / 2.0
    for k in range(n_steps):
        k1 = _rhs8_scalar(y, *args)
        k2 = _rhs8_scalar(tuple(a + half * b for a, b in zip(y, k1)), *args)
        k3 = _rhs8_scalar(tuple(a + half * b for a, b in zip(y, k2)), *args)
        k4 = _rhs8_scalar(tuple(a + dt * b for a, b in zip(y, k3)), *args)
        y = tuple(a + sixth * (b1 + 2.0 * (b2 + b3) + b4)
                  for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
        t = state.t + (k + 1) * dt
        if min(y[:4]) <= 0:
            raise RuntimeError(f"means left the positive orthant at t={t}; reduce dt")
        if (k + 1) % stride == 0 or k == n_steps - 1:
            out.append(MomentState(t=t, m=np.array(y[:4]), v=np.array(y[4:])))
    return out
