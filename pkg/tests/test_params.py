import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdkinetics import ParameterSet, validate, scaled


def test_table_defaults_are_valid(table_params):
    report = validate(table_params)
    assert report.ok
    assert str(report) == "ok"


def test_large_noise_is_flagged():
    report = validate(ParameterSet(sigma2_N=0.5))
    assert not report.ok
    assert any("sigma_N^2 >= 2*beta_N" in v for v in report.violations)
    assert not ParameterSet(sigma2_N=0.5).variances_finite


def test_zero_rate_is_flagged():
    report = validate(ParameterSet(beta_M=0.0))
    assert any("beta_M must be positive" in v for v in report.violations)


def test_validate_is_pure(table_params):
    assert validate(table_params).violations == validate(table_params).violations


def test_scaling_identity(table_params):
    assert scaled(table_params, 1.0) == table_params


def test_scaling_table_values(table_params):
    sp = scaled(table_params, 1e-2)
    assert sp.beta_N == pytest.approx(2e-3)
    assert sp.sigma2_N == pytest.approx(1e-4)
    assert sp.gamma_M == pytest.approx(5e-4)
    assert sp.nu_control == 0.0
    assert sp.epsilon == pytest.approx(1e-2)


def test_scaling_range_checked(table_params):
    with pytest.raises(ValueError):
        scaled(table_params, 0.0)
    with pytest.raises(ValueError):
        scaled(table_params, 1.5)


@given(a=st.floats(0.01, 1.0), b=st.floats(0.01, 1.0))
def test_scaling_composes_multiplicatively(a, b):
    p = ParameterSet()
    twice = scaled(scaled(p, a), b)
    once = scaled(p, a * b)
    for name in ("beta_N", "sigma2_D", "gamma_M", "epsilon"):
        assert getattr(twice, name) == pytest.approx(getattr(once, name), rel=1e-12)


@given(eps=st.floats(1e-6, 1.0))
def test_scaling_preserves_validity(eps):
    p = ParameterSet()
    assert validate(scaled(p, eps)).ok


def test_moment_state_shape_checked():
    from mdkinetics import MomentState
    with pytest.raises(ValueError):
        MomentState(t=0.0, m=np.ones(3), v=np.ones(4))
    s = MomentState(t=0.0, m=[9, 1, 0.1, 0.5], v=[0.1] * 4)
    assert s.m_N == 9 and s.m_C == 0.5
