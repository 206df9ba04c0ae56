import numpy as np
import pytest

from ffqls import states as st
from ffqls.tensor import NeighborhoodStructure, SubsystemLayout


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def overlapping_triples():
    return NeighborhoodStructure(SubsystemLayout.qudits(4), ((1, 2, 3), (2, 3, 4)))


@pytest.fixture(scope="session")
def rho_eps_half():
    return st.rho_epsilon(0.5)


def random_density(d, rng, rank=None):
    G = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    R = G @ G.conj().T
    return R / np.trace(R).real


def random_unitary(d, rng):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))
