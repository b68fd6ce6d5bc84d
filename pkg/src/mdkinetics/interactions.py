"""Microscopic interaction rules and bounded-moment noise laws.

All updates are pure functions mapping nonnegative cell densities to
nonnegative cell densities.  The multiplicative structure guarantees
positivity whenever the noise draw satisfies ``1 - beta - |eta| >= 0``,
which the sampler construction checks up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Supported zero-mean noise laws.
NOISE_LAWS = ("two-point", "uniform-symmetric")


def saturation(x: float) -> float:
    """Saturation response x / (1 + x), monotone from 0 toward 1."""
    if x < 0:
        raise ValueError(f"density must be nonnegative, got {x}")
    return x / (1.0 + x)


def degeneration_update(x_N: float, x_C: float, eta: float, beta_N: float) -> float:
    """Normal-cell density after an encounter with cytotoxic T lymphocytes.

    ``x_N' = x_N - beta_N * Phi(x_C) * x_N + eta * x_N`` where the noise draw
    ``eta`` is expected to carry variance ``sigma_N^2 * Phi(x_C)``.
    """
    if x_N < 0 or x_C < 0:
        raise ValueError("densities must be nonnegative")
    return x_N - beta_N * saturation(x_C) * x_N + eta * x_N


def clearance_update(x_D: float, x_M: float, eta: float, beta_D: float) -> float:
    """Damaged-cell density after clearance by macrophages (mirror of degeneration)."""
    if x_D < 0 or x_M < 0:
        raise ValueError("densities must be nonnegative")
    return x_D - beta_D * saturation(x_M) * x_D + eta * x_D


def replenish_update(x_N: float, x_D: float, x_M: float, beta_D: float) -> float:
    """Normal-cell density gain from damaged-cell clearance: x_N + beta_D*Phi(x_M)*x_D."""
    if x_N < 0 or x_D < 0 or x_M < 0:
        raise ValueError("densities must be nonnegative")
    return x_N + beta_D * saturation(x_M) * x_D


def damage_gain_update(x_D: float, x_N: float, x_C: float, beta_N: float) -> float:
    """Damaged-cell density gain from degeneration: x_D + beta_N*Phi(x_C)*x_N."""
    if x_D < 0 or x_N < 0 or x_C < 0:
        raise ValueError("densities must be nonnegative")
    return x_D + beta_N * saturation(x_C) * x_N


def decay_update(x: float, eta: float, beta: float) -> float:
    """Immune-cell density after natural decay with fluctuation: x(1 - beta + eta)."""
    if x < 0:
        raise ValueError("density must be nonnegative")
    return x - beta * x + eta * x


def recruitment_update(x: float, source: float, gamma: float, nu_control: float = 0.0) -> float:
    """Immune-cell density gain driven by a source population.

    ``x'' = x + gamma * source - nu_control * x``.  The control term applies
    only to the C population; pass ``nu_control=0`` for M.  Values of
    ``nu_control`` above 1 would break positivity of the rule and are rejected.
    """
    if x < 0 or source < 0:
        raise ValueError("densities must be nonnegative")
    if nu_control > 1.0:
        raise ValueError("nu_control > 1 breaks positivity of the recruitment rule")
    return x + gamma * source - nu_control * x


@dataclass(frozen=True)
class NoiseSpec:
    """A zero-mean noise law with exactly the requested second moment.

    ``two-point`` draws +/- sqrt(variance) with probability 1/2 each;
    ``uniform-symmetric`` draws uniformly on [-sqrt(3 variance), +sqrt(3 variance)].
    Both have finite third absolute moment.
    """

    law: str = "two-point"

    def __post_init__(self):
        if self.law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.law!r}; choose from {NOISE_LAWS}")

    @property
    def amplitude_factor(self) -> float:
        """Max |eta| per unit standard deviation: 1 for two-point, sqrt(3) for uniform."""
        return 1.0 if self.law == "two-point" else math.sqrt(3.0)

    def check_positivity(self, beta: float, sigma2: float) -> None:
        """Fail fast if a worst-case draw could push a density negative.

        Worst case is saturation at 1: requires 1 - beta - max|eta| >= 0 with
        max|eta| = amplitude_factor * sigma.
        """
        margin = 1.0 - beta - self.amplitude_factor * math.sqrt(sigma2)
        if margin < 0:
            raise ValueError(
                f"noise law {self.law!r} admits draws violating positivity "
                f"(beta={beta}, sigma2={sigma2}, margin={margin:.4f})"
            )


def sample_noise(spec: NoiseSpec, variance: float, rng: np.random.Generator,
                 size: int | None = None):
    """Draw eta with mean 0 and second moment exactly ``variance``."""
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    if variance == 0:
        return 0.0 if size is None else np.zeros(size)
    if spec.law == "two-point":
        s = math.sqrt(variance)
        if size is None:
            return s if rng.random() < 0.5 else -s
        return np.where(rng.random(size) < 0.5, s, -s)
    half_width = math.sqrt(3.0 * variance)
    if size is None:
        return rng.uniform(-half_width, half_width)
    return rng.uniform(-half_width, half_width, size)
