import random

import pytest

from ncarq.coeffspace import from_dense
from ncarq.field import PrimeField


@pytest.fixture
def gf2():
    return PrimeField(2)


@pytest.fixture
def gf5():
    return PrimeField(5)


def random_vectors(rng: random.Random, f: PrimeField, count: int, width: int):
    """Random dense rows turned into coefficient vectors (zero rows allowed)."""
    out = []
    for _ in range(count):
        row = [rng.randrange(f.q) for _ in range(width)]
        out.append(from_dense(row, f))
    return out
