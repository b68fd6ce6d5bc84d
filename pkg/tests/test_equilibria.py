import numpy as np
import pytest
from scipy.integrate import quad

from mdkinetics import (MomentState, integrate, equilibrium,
                        quasi_equilibrium, inverse_gamma_pdf, equilibrium_specs,
                        stationary_residual, InverseGammaSpec)
from mdkinetics.equilibria import shape_parameters, scale_parameters
from mdkinetics.params import POPULATIONS


def test_shape_parameters(table_params):
    assert shape_parameters(table_params) == pytest.approx([41.0, 21.0, 41.0, 21.0])


def test_equilibrium_scales(table_params):
    specs = equilibrium_specs(table_params, 10.0)
    assert [specs[p].omega for p in POPULATIONS] == pytest.approx([200.0, 100.0, 50.0, 12.5])
    # mean identity omega/(nu-1) recovers the equilibrium means
    assert [specs[p].mean for p in POPULATIONS] == pytest.approx([5.0, 5.0, 1.25, 0.625])


def test_quasi_equilibrium_mean_identities(table_params):
    state = MomentState(t=0.0, m=[9.0, 1.0, 0.6, 0.6], v=[0.1] * 4)
    spec_m = quasi_equilibrium("M", state, table_params)
    assert spec_m.mean == pytest.approx(table_params.gamma_M * 1.0 / table_params.beta_M)
    spec_n = quasi_equilibrium("N", state, table_params)
    expect = table_params.beta_D * 0.6 * 1.0 / (table_params.beta_N * 0.6)
    assert spec_n.mean == pytest.approx(expect)


def test_quasi_equilibrium_needs_positive_driving_means(table_params):
    state = MomentState(t=0.0, m=[9.0, 1.0, 0.0, 0.6], v=[0.1] * 4)
    with pytest.raises(ValueError):
        quasi_equilibrium("D", state, table_params)


def test_pdf_quadrature_unit_mass():
    spec = InverseGammaSpec(nu=41.0, omega=200.0)
    total, err = quad(lambda x: inverse_gamma_pdf(spec, x), 0.0, 12.0, limit=200)
    tail = spec.tail_mass(12.0)
    assert total + tail == pytest.approx(1.0, abs=1e-8)
    assert tail < 1e-4


def test_pdf_moment_identities():
    spec = InverseGammaSpec(nu=41.0, omega=200.0)
    mean, _ = quad(lambda x: x * inverse_gamma_pdf(spec, x), 0.0, 60.0, limit=400)
    assert mean == pytest.approx(spec.mean, abs=1e-8)
    var, _ = quad(lambda x: (x - spec.mean) ** 2 * inverse_gamma_pdf(spec, x),
                  0.0, 60.0, limit=400)
    assert var == pytest.approx(spec.variance, abs=1e-6)
    assert spec.variance == pytest.approx(200.0**2 / (40.0**2 * 39.0), rel=1e-12)


def test_pdf_mode():
    spec = InverseGammaSpec(nu=21.0, omega=100.0)
    xs = np.linspace(3.0, 7.0, 20001)
    vals = np.asarray(inverse_gamma_pdf(spec, xs))
    assert xs[np.argmax(vals)] == pytest.approx(spec.mode, abs=1e-3)


def test_pdf_zero_for_nonpositive_x():
    spec = InverseGammaSpec(nu=41.0, omega=200.0)
    assert inverse_gamma_pdf(spec, 0.0) == 0.0
    assert inverse_gamma_pdf(spec, -1.0) == 0.0


def test_pdf_no_overflow_large_shape():
    spec = InverseGammaSpec(nu=41.0, omega=200.0)
    vals = np.asarray(inverse_gamma_pdf(spec, np.linspace(0.01, 12, 1000)))
    assert np.all(np.isfinite(vals)) and vals.max() > 0


def test_stationary_residual_machine_small(table_params):
    """The quasi-equilibrium density annihilates the stationary flux operator."""
    eq = equilibrium(table_params, 10.0)
    state = MomentState(t=0.0, m=eq.m, v=eq.v)
    x = np.linspace(0.015, 11.985, 799)
    coeff_map = {
        "N": (table_params.beta_N * eq.m[3], table_params.beta_D * eq.m[2] * eq.m[1],
              table_params.sigma2_N * eq.m[3]),
        "M": (table_params.beta_M, table_params.gamma_M * eq.m[1], table_params.sigma2_M),
    }
    for pop, (lam, mu, kap) in coeff_map.items():
        spec = quasi_equilibrium(pop, state, table_params)
        res = np.asarray(stationary_residual(spec, lam, mu, kap, x))
        assert np.max(np.abs(res)) <= 1e-8

        # independent finite-difference cross-check of the flux derivative
        h = 1e-6
        f = lambda z: np.asarray(inverse_gamma_pdf(spec, z))
        d_flux = (f(x + h) * (x + h) ** 2 - f(x - h) * (x - h) ** 2) / (2 * h)
        res_fd = (lam * x - mu) * f(x) + 0.5 * kap * d_flux
        assert np.max(np.abs(res_fd)) <= 1e-4


def test_quasi_equilibrium_converges_to_equilibrium(table_params):
    s0 = MomentState(t=0.0, m=[9.0, 1.0, 0.6, 0.6], v=[0.1] * 4)
    traj = integrate(s0, table_params, 300.0, dt=1e-2, report_dt=50.0)
    specs_inf = equilibrium_specs(table_params, 10.0)
    final = traj[-1]
    omegas = scale_parameters(final, table_params)
    for i, pop in enumerate(POPULATIONS):
        spec_t = InverseGammaSpec(nu=float(shape_parameters(table_params)[i]),
                                  omega=float(omegas[i]))
        assert spec_t.mean == pytest.approx(specs_inf[pop].mean, abs=1e-6)
        assert spec_t.variance == pytest.approx(specs_inf[pop].variance, abs=1e-6)
        # sup-norm convergence of the density itself on the grid
        x = np.linspace(0.015, 11.985, 799)
        gap = np.max(np.abs(np.asarray(inverse_gamma_pdf(spec_t, x))
                            - np.asarray(inverse_gamma_pdf(specs_inf[pop], x))))
        assert gap < 1e-4


def test_omega_bounds_along_trajectory(table_params):
    s0 = MomentState(t=0.0, m=[9.0, 1.0, 0.6, 0.6], v=[0.1] * 4)
    traj = integrate(s0, table_params, 100.0, dt=1e-2, report_dt=1.0)
    omegas = np.array([scale_parameters(s, table_params) for s in traj])
    assert np.all(omegas > 0) and np.all(np.isfinite(omegas))


def test_spec_validation():
    with pytest.raises(ValueError):
        InverseGammaSpec(nu=0.5, omega=1.0)
    with pytest.raises(ValueError):
        InverseGammaSpec(nu=3.0, omega=-1.0)
    with pytest.raises(ValueError):
        InverseGammaSpec(nu=1.5, omega=1.0).variance
