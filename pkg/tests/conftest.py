import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_gapped_hermitian(rng, dim, gap=0.5, n_low=1):
    """Random Hermitian matrix whose lowest ``n_low`` eigenvalues (equal) sit ``gap`` below the rest."""
    Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    ev = np.concatenate([np.zeros(n_low), gap + rng.uniform(0, 3, dim - n_low)])
    return (Q * ev) @ Q.conj().T, Q, ev


def random_hermitian(rng, dim):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (A + A.conj().T)
