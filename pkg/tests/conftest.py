import numpy as np
import pytest

from mdkinetics import ParameterSet


@pytest.fixture
def table_params():
    """The standard parameter table used throughout the numerical experiments."""
    return ParameterSet()


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)
