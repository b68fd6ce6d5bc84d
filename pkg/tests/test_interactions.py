import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdkinetics.interactions import (saturation, degeneration_update, clearance_update,
                                     replenish_update, damage_gain_update, decay_update,
                                     recruitment_update, sample_noise, NoiseSpec)

densities = st.floats(0.0, 50.0)


def test_saturation_values():
    assert saturation(0.0) == 0.0
    assert saturation(1.0) == 0.5
    xs = np.linspace(0, 200, 500)
    vals = [saturation(x) for x in xs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1.0 and vals[-1] > 0.99
    with pytest.raises(ValueError):
        saturation(-0.1)


def test_degeneration_arithmetic():
    assert degeneration_update(10.0, 1.0, 0.0, 0.2) == pytest.approx(9.0)
    assert degeneration_update(0.0, 3.0, 0.05, 0.2) == 0.0


def test_degeneration_no_lymphocytes_is_identity():
    # zero partner density means zero noise variance, so eta must be 0
    for law in ("two-point", "uniform-symmetric"):
        eta = sample_noise(NoiseSpec(law), 0.0, np.random.default_rng(0))
        assert eta == 0.0
        assert degeneration_update(7.3, 0.0, eta, 0.2) == 7.3


def test_clearance_arithmetic():
    assert clearance_update(4.0, 1.0, 0.0, 0.1) == pytest.approx(3.8)
    assert clearance_update(4.0, 0.0, 0.0, 0.1) == 4.0
    assert clearance_update(0.0, 1.0, 0.0, 0.1) == 0.0


def test_replenish_arithmetic():
    assert replenish_update(9.0, 4.0, 1.0, 0.1) == pytest.approx(9.2)
    assert replenish_update(9.0, 4.0, 0.0, 0.1) == 9.0
    assert replenish_update(9.0, 0.0, 1.0, 0.1) == 9.0


def test_damage_gain_arithmetic():
    assert damage_gain_update(1.0, 9.0, 1.0, 0.2) == pytest.approx(1.9)
    assert damage_gain_update(1.0, 9.0, 0.0, 0.2) == 1.0
    assert damage_gain_update(1.0, 0.0, 1.0, 0.2) == 1.0


def test_decay_arithmetic():
    assert decay_update(0.1, 0.0, 0.2) == pytest.approx(0.08)
    assert decay_update(0.0, 0.05, 0.2) == 0.0
    # a +sigma two-point draw with sigma^2 = 0.01 scales by 1 - 0.2 + 0.1
    assert decay_update(1.0, math.sqrt(0.01), 0.2) == pytest.approx(0.9)


def test_recruitment_arithmetic():
    assert recruitment_update(0.1, 1.0, 0.05) == pytest.approx(0.15)
    assert recruitment_update(0.1, 0.0, 0.05) == 0.1
    assert recruitment_update(0.5, 0.1, 0.05, nu_control=0.1) == pytest.approx(0.455)
    with pytest.raises(ValueError):
        recruitment_update(0.5, 0.1, 0.05, nu_control=1.5)


def test_noise_two_point_support(rng):
    draws = sample_noise(NoiseSpec("two-point"), 0.01, rng, size=1000)
    assert set(np.round(np.unique(draws), 12)) == {-0.1, 0.1}
    # second moment is exact by construction
    assert np.mean(draws**2) == pytest.approx(0.01)


@pytest.mark.parametrize("law", ["two-point", "uniform-symmetric"])
def test_noise_moments_empirical(law, rng):
    var = 0.04
    n = 1_000_000
    draws = sample_noise(NoiseSpec(law), var, rng, size=n)
    assert abs(draws.mean()) < 4.0 * math.sqrt(var / n)
    # CLT band for the second moment (fourth moment bounded by 9 var^2 here)
    assert abs(np.mean(draws**2) - var) < 5.0 * 3.0 * var / math.sqrt(n)
    assert np.all(np.isfinite(np.abs(draws) ** 3))


def test_noise_zero_variance_deterministic(rng):
    assert sample_noise(NoiseSpec("two-point"), 0.0, rng) == 0.0


def test_positivity_guard():
    NoiseSpec("two-point").check_positivity(0.2, 0.01)  # margin 0.7
    with pytest.raises(ValueError):
        NoiseSpec("two-point").check_positivity(0.6, 0.25)
    with pytest.raises(ValueError):
        NoiseSpec("uniform-symmetric").check_positivity(0.2, 0.3)


def test_unknown_law_rejected():
    with pytest.raises(ValueError):
        NoiseSpec("gaussian")


@given(x_n=densities, x_d=densities, x_m=densities, x_c=densities,
       beta=st.floats(0.01, 0.5), sigma2=st.floats(0.0, 0.2),
       law=st.sampled_from(["two-point", "uniform-symmetric"]),
       seed=st.integers(0, 2**31))
def test_positivity_closure(x_n, x_d, x_m, x_c, beta, sigma2, law, seed):
    """Every update stays nonnegative for admissible parameters and any draw."""
    spec = NoiseSpec(law)
    try:
        spec.check_positivity(beta, sigma2)
    except ValueError:
        return  # inadmissible pairing, sampler construction refuses it
    gen = np.random.default_rng(seed)
    eta_n = sample_noise(spec, sigma2 * saturation(x_c), gen)
    eta_d = sample_noise(spec, sigma2 * saturation(x_m), gen)
    eta = sample_noise(spec, sigma2, gen)
    assert degeneration_update(x_n, x_c, eta_n, beta) >= 0
    assert clearance_update(x_d, x_m, eta_d, beta) >= 0
    assert replenish_update(x_n, x_d, x_m, beta) >= 0
    assert damage_gain_update(x_d, x_n, x_c, beta) >= 0
    assert decay_update(x_m, eta, beta) >= 0
    assert recruitment_update(x_c, x_m, 0.05, nu_control=0.1) >= 0


@given(x_n=densities, x_d=densities, x_m=densities, x_c=densities)
def test_mass_exchange_symmetry(x_n, x_d, x_m, x_c):
    """With eta = 0 the deterministic loss of one population equals the gain of the other."""
    b_n, b_d = 0.2, 0.1
    loss_n = degeneration_update(x_n, x_c, 0.0, b_n) - x_n
    gain_d = damage_gain_update(x_d, x_n, x_c, b_n) - x_d
    assert loss_n + gain_d == pytest.approx(0.0, abs=1e-12)
    loss_d = clearance_update(x_d, x_m, 0.0, b_d) - x_d
    gain_n = replenish_update(x_n, x_d, x_m, b_d) - x_n
    assert loss_d + gain_n == pytest.approx(0.0, abs=1e-12)
