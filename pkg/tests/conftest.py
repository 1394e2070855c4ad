import numpy as np
import pytest
from hypothesis import settings

from evostab.kernels import ExpSumKernel
from evostab.scenario import WaveScenario
from evostab.spatial import dirichlet_1d

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def kernel():
    """``k(t) = 0.5 exp(-t)`` declared at ``alpha = 0.25``."""
    return ExpSumKernel((0.5,), (1.0,), alpha=0.25)


@pytest.fixture(scope="session")
def C31():
    return dirichlet_1d(31)


@pytest.fixture(scope="session")
def damped(C31):
    return WaveScenario(C31, gamma=0.2, r=5.0)


@pytest.fixture(scope="session")
def integro(C31, kernel):
    return WaveScenario(C31, kernel=kernel)


@pytest.fixture(scope="session")
def damped_sim(damped):
    from evostab.timedomain import simulate

    return simulate(damped, 60.0, 1e-3)


@pytest.fixture(scope="session")
def damped_cert(damped):
    from evostab.certify import certify_scenario

    return certify_scenario(damped)


@pytest.fixture(scope="session")
def integro_cert(integro):
    from evostab.certify import certify_scenario

    return certify_scenario(integro)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
