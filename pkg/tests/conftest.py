"""
Fixtures compartilhadas dos testes
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.bounds import BoundContext  # noqa: E402
from core.costs import CostSpec, WeightedNormCost  # noqa: E402
from core.experiment_config import resolve_config  # noqa: E402
from core.geometry import ControlBox, PolytopeConstraint, UnitBallPolytope  # noqa: E402
from core.models import SystemModel, scalar_sine_nonlinearity, zero_nonlinearity  # noqa: E402


@pytest.fixture
def scalar_model():
    """x⁺ = 0.75x + u + 0.1x − sin(0.1x)"""
    return SystemModel(A=[[0.75]], B=[[1.0]], f=scalar_sine_nonlinearity(0.1), L_f=0.2, M_f=0.0, name='scalar')


@pytest.fixture
def scalar_linear_model():
    return SystemModel(A=[[0.75]], B=[[1.0]], f=zero_nonlinearity(1), L_f=0.0, M_f=0.0, name='scalar_linear')


@pytest.fixture
def scalar_cost():
    """|x| + √5|u| com terminal √2|x_N|, N = 10"""
    structure = WeightedNormCost([[1.0]], [[np.sqrt(5.0)]], [[np.sqrt(2.0)]], p=1)
    return CostSpec.from_weighted_norms(structure, N=10)


@pytest.fixture
def scalar_ctx():
    return BoundContext(a=0.75, L_f=0.2, M_f=0.0, omega=0.02, L_phi=1.0, L_psi=np.sqrt(2.0), N=10)


@pytest.fixture
def terminal_box():
    return PolytopeConstraint.symmetric_box(10, [2.5])


@pytest.fixture
def control_box():
    return ControlBox.symmetric([3.0])


@pytest.fixture
def scalar_gauge():
    return UnitBallPolytope.default(1, 1)


@pytest.fixture(scope='session')
def example1_config():
    return resolve_config('example1')


@pytest.fixture(scope='session')
def degenerate_config():
    return resolve_config('degenerate')
