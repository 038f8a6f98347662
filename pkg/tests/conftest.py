import numpy as np
import pytest

from distillery.densop import DensityOperator


def random_density(rng: np.random.Generator, n_qubits: int) -> DensityOperator:
    """Ginibre-random full-rank density operator."""
    dim = 2**n_qubits
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    mat = a @ a.conj().T
    return DensityOperator(n_qubits, mat / np.trace(mat))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240514)
