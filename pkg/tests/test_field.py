import itertools

import pytest
from hypothesis import given, strategies as st

from ncarq.field import FieldError, PrimeField, ff_add, ff_inv, ff_mul, is_prime, smallest_prime_at_least


@pytest.mark.parametrize("q,a,b,want", [(5, 3, 4, 2), (2, 1, 1, 0), (7, 0, 6, 6)])
def test_add(q, a, b, want):
    assert ff_add(a, b, PrimeField(q)) == want


@pytest.mark.parametrize("q,a,b,want", [(5, 3, 4, 2), (5, 1, 4, 4), (3, 2, 2, 1)])
def test_mul(q, a, b, want):
    assert ff_mul(a, b, PrimeField(q)) == want


@pytest.mark.parametrize("q,a,want", [(5, 2, 3), (5, 4, 4), (2, 1, 1)])
def test_inv(q, a, want):
    assert ff_inv(a, PrimeField(q)) == want


def test_inverse_of_zero_is_an_error():
    with pytest.raises(ZeroDivisionError, match="no inverse of zero"):
        ff_inv(0, PrimeField(5))


@pytest.mark.parametrize("q", [1, 4, 9, 256])
def test_non_prime_order_rejected(q):
    with pytest.raises(FieldError):
        PrimeField(q)


@pytest.mark.parametrize("q", [2, 3, 5, 7])
def test_field_axioms_exhaustive(q):
    f = PrimeField(q)
    E = range(q)
    for a, b, c in itertools.product(E, E, E):
        assert f.add(f.add(a, b), c) == f.add(a, f.add(b, c))
        assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
    for a, b in itertools.product(E, E):
        assert f.add(a, b) == f.add(b, a)
        assert f.mul(a, b) == f.mul(b, a)
    for a in E:
        assert f.add(a, 0) == a and f.mul(a, 1) == a
        assert f.add(a, f.neg(a)) == 0
        if a:
            assert f.mul(a, f.inv(a)) == 1


@pytest.mark.parametrize("q", [p for p in range(2, 258) if is_prime(p)])
def test_inverse_is_an_involution(q):
    f = PrimeField(q)
    for a in range(1, q):
        assert f.inv(f.inv(a)) == a


@given(st.sampled_from([11, 13, 257, 65537, 1_000_003]), st.data())
def test_field_axioms_random(q, data):
    f = PrimeField(q)
    a, b, c = (data.draw(st.integers(0, q - 1)) for _ in range(3))
    assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
    if a:
        assert f.mul(a, f.inv(a)) == 1


@pytest.mark.parametrize("n,want", [(0, 2), (1, 2), (2, 2), (3, 3), (4, 5), (5, 5), (8, 11)])
def test_smallest_prime_at_least(n, want):
    assert smallest_prime_at_least(n) == want
