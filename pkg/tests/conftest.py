import numpy as np
import pytest

from cvverify.states import ResourceSpec, cubic_phase_state
from cvverify.witness import build_witness


@pytest.fixture(scope="session")
def default_resource():
    return ResourceSpec(gamma_tilde=0.1, s=1.0, dim=40)


@pytest.fixture(scope="session")
def honest_state(default_resource):
    return cubic_phase_state(default_resource)


@pytest.fixture(scope="session")
def default_witness(default_resource):
    return build_witness(default_resource)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
