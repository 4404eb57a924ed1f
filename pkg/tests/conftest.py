import numpy as np
import pytest

from m2spec import IndexSet, TorusGrid


def random_hermitian(rng, m, scale=1.0):
    A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return scale * (A + A.conj().T) / 2


def random_psd(rng, m, rank=None, shift=0.0):
    B = rng.standard_normal((m, rank or m)) + 1j * rng.standard_normal((m, rank or m))
    return B @ B.conj().T + shift * np.eye(m)


def random_symmetric_coeffs(rng, index_set, m, scale=1.0):
    """Random coefficient set with C_{-k} = C_k^*."""
    L = len(index_set)
    C = scale * (rng.standard_normal((L, m, m)) + 1j * rng.standard_normal((L, m, m)))
    out = 0.5 * (C + np.conj(np.swapaxes(C[index_set.neg], 1, 2)))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid2():
    return TorusGrid(2, 16)


@pytest.fixture
def box2():
    return IndexSet.box(2, 1)
