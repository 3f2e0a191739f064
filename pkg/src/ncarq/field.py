"""Arithmetic in prime fields F_q."""

from __future__ import annotations

from dataclasses import dataclass, field


class FieldError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def smallest_prime_at_least(n: int) -> int:
    n = max(2, n)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class PrimeField:
    """The field of integers modulo a prime ``q``."""

    q: int
    _inv: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.q, int) or not is_prime(self.q):
            raise FieldError(f"field order must be prime, got {self.q!r}")
        # Inverse table for small fields; larger ones fall back to pow().
        if self.q <= 1 << 16:
            inv = [0] + [pow(a, -1, self.q) for a in range(1, self.q)]
            object.__setattr__(self, "_inv", tuple(inv))

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return -a % self.q

    def inv(self, a: int) -> int:
        a %= self.q
        if a == 0:
            raise ZeroDivisionError("no inverse of zero")
        if self._inv:
            return self._inv[a]
        return pow(a, -1, self.q)

    def check(self, a: int) -> int:
        if not 0 <= a < self.q:
            raise FieldError(f"{a} is not an element of F_{self.q}")
        return a

    def elements(self) -> range:
        return range(self.q)


def ff_add(a: int, b: int, f: PrimeField) -> int:
    return f.add(a, b)


def ff_mul(a: int, b: int, f: PrimeField) -> int:
    return f.mul(a, b)


def ff_inv(a: int, f: PrimeField) -> int:
    return f.inv(a)
