import numpy as np
import pytest

from kinetic_moments import ClosureContext, SolverConfig, build_basis, get_entropy


@pytest.fixture(scope="session")
def mb():
    return get_entropy("mb")


@pytest.fixture(scope="session")
def basis5():
    return build_basis(5)


@pytest.fixture(scope="session")
def ctx5(mb, basis5):
    return ClosureContext(mb, basis5, SolverConfig(), sigma_s=1.0)


def random_multipliers(rng, count, n, max_norm):
    a = rng.normal(size=(count, n))
    a *= (rng.uniform(0.0, max_norm, size=count) / np.linalg.norm(a, axis=1))[:, None]
    return a


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
