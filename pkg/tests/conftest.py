import numpy as np
import pytest

from stochwave import assemble, build_mesh, eig_pencil


@pytest.fixture(scope="session")
def mesh64():
    return build_mesh(64)


@pytest.fixture(scope="session")
def ops64(mesh64):
    return assemble(mesh64)


@pytest.fixture(scope="session")
def decomp64(ops64):
    return eig_pencil(ops64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
