import numpy as np
import pytest

from hkgsim.fockmath import FockDensity, FockKet


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_ket(dim: int, rng: np.random.Generator) -> FockKet:
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return FockKet(dim, amps).normalize()


def random_density(dim: int, rng: np.random.Generator, rank: int = 3) -> FockDensity:
    """Random mixed state as a convex mixture of random pure states."""
    weights = rng.dirichlet(np.ones(rank))
    m = np.zeros((dim, dim), dtype=complex)
    for w in weights:
        ket = random_ket(dim, rng)
        m += w * np.outer(ket.amplitudes, ket.amplitudes.conj())
    return FockDensity(dim, m)


def random_complete_kraus(dim: int, n_ops: int, rng: np.random.Generator):
    """Exactly trace-preserving random Kraus set: A_k normalized by S^(-1/2)."""
    from hkgsim.fockmath import KrausSet

    ops = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
           for _ in range(n_ops)]
    s = sum(a.conj().T @ a for a in ops)
    vals, vecs = np.linalg.eigh(s)
    s_inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.conj().T
    return KrausSet(dim, tuple(a @ s_inv_sqrt for a in ops))
