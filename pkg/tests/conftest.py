import numpy as np
import pytest

from cohaudit import EnsembleSpec, generate


@pytest.fixture(scope="session")
def gauss_200x400():
    return generate(EnsembleSpec("gaussian", 200, 400, 42))


@pytest.fixture(scope="session")
def gauss_100x500():
    return generate(EnsembleSpec("gaussian", 100, 500, 7))


@pytest.fixture(scope="session")
def ortho_30():
    """A random 30x30 orthonormal matrix (unit columns, zero coherence)."""
    rng = np.random.default_rng(2024)
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    return q
