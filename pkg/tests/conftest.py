import numpy as np
import pytest

from itd_metrology.physics import OamBasis


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


def random_unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng, dim, rank=None):
    rank = dim if rank is None else rank
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)


@pytest.fixture
def small_basis():
    return OamBasis(-6, 6)


def random_probe(rng, basis, reach, width=None, rank=None):
    """Random mixed probe supported at least ``reach`` inside the basis edges.

    Returned ensemble is the spectral decomposition of the probe density
    matrix, embedded in the full OAM basis.
    """
    from itd_metrology.linalg import StateEnsemble
    from itd_metrology.physics import safe_oam_indices

    idx = safe_oam_indices(basis, reach)
    if width is not None and width < idx.size:
        start = rng.integers(0, idx.size - width + 1)
        idx = idx[start:start + width]
    rho_small = random_density(rng, idx.size, rank=rank if rank is not None else int(rng.integers(1, idx.size + 1)))
    local = StateEnsemble.from_density(rho_small, cutoff=1e-13)
    vecs = np.zeros((len(local), basis.dim), dtype=complex)
    vecs[:, idx] = local.vectors
    return StateEnsemble(local.weights, vecs), idx


def random_ancilla(rng):
    return tuple(random_unit(rng, 2))
