import math
from itertools import permutations

import numpy as np
import pytest

from qudit_bell.fock import SparseState, enumerate_sector


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng, modes, photons):
    basis = enumerate_sector(modes, photons)
    amps = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    amps /= np.linalg.norm(amps)
    return SparseState(modes, dict(zip(basis, amps)))


def naive_permanent(a):
    n = len(a)
    return sum(math.prod(a[i, p[i]] for i in range(n)) for p in permutations(range(n)))


def polynomial_image(matrix, occupation):
    """Expand prod_k (sum_j U[j,k] x_j)^{n_k} / sqrt(prod n_k!) monomial by monomial.

    Independent of the splitter decomposition and of the permanent: the
    creation-operator polynomial is multiplied out term by term and
    x^m |vac> is read as sqrt(prod m!) |m>.
    """
    m = len(matrix)
    poly = {(0,) * m: 1.0 + 0j}
    for k, n in enumerate(occupation):
        for _ in range(n):
            nxt = {}
            for mono, c in poly.items():
                for j in range(m):
                    if matrix[j, k] == 0:
                        continue
                    key = list(mono)
                    key[j] += 1
                    key = tuple(key)
                    nxt[key] = nxt.get(key, 0j) + c * matrix[j, k]
            poly = nxt
    norm_in = math.sqrt(math.prod(math.factorial(n) for n in occupation))
    return {
        mono: c * math.sqrt(math.prod(math.factorial(x) for x in mono)) / norm_in
        for mono, c in poly.items()
        if abs(c) > 1e-14
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
