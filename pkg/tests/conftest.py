import numpy as np
import pytest

from sparsedemix.tuples import MatrixTuple


def random_tuple(rng, profile, sparsity=None):
    blocks = []
    for idx, (k, n) in enumerate(profile):
        b = rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))
        if sparsity is not None:
            keep = rng.choice(n, size=sparsity[idx], replace=False)
            mask = np.zeros(n, dtype=bool)
            mask[keep] = True
            b[:, ~mask] = 0
        blocks.append(b)
    return MatrixTuple(blocks)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
