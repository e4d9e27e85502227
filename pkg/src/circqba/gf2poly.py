"""Polynomials over GF(2).

A polynomial is packed into a Python int: bit k is the coefficient of x^k.
The zero polynomial is ``Poly2(0)`` and has degree -1.

Irreducibility is decided with Rabin's test: a polynomial p of degree N is
irreducible iff x^(2^N) = x (mod p) and gcd(x^(2^(N/q)) - x, p) = 1 for
every prime q dividing N.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache


@dataclass(frozen=True, order=True)
class Poly2:
    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("coefficient vector must be non-negative")

    @classmethod
    def from_coeffs(cls, coeffs) -> Poly2:
        """Build from a sequence where index k holds the coefficient of x^k."""
        value = 0
        for k, c in enumerate(coeffs):
            if c not in (0, 1):
                raise ValueError(f"coefficient {c!r} is not in GF(2)")
            value |= c << k
        return cls(value)

    @classmethod
    def from_exponents(cls, *exps: int) -> Poly2:
        value = 0
        for e in exps:
            value ^= 1 << e
        return cls(value)

    @property
    def degree(self) -> int:
        return self.value.bit_length() - 1

    @property
    def coeffs(self) -> list[int]:
        return [(self.value >> k) & 1 for k in range(self.degree + 1)]

    @property
    def low_coeffs(self) -> int:
        """Coefficients below the leading term, as an int of ``degree`` bits."""
        return self.value & ((1 << self.degree) - 1) if self.value else 0

    def __bool__(self) -> bool:
        return self.value != 0

    def __str__(self) -> str:
        if not self.value:
            return "0"
        terms = []
        for k in range(self.degree, -1, -1):
            if (self.value >> k) & 1:
                terms.append("1" if k == 0 else "x" if k == 1 else f"x^{k}")
        return " + ".join(terms)


ZERO = Poly2(0)
ONE = Poly2(1)


def _clmul(a: int, b: int) -> int:
    if a < b:
        a, b = b, a
    c = 0
    while b:
        if b & 1:
            c ^= a
        a <<= 1
        b >>= 1
    return c


def _square(a: int) -> int:
    # squaring over GF(2) interleaves zeros between the coefficients
    if a <= 1:
        return a
    return int("0".join(bin(a)[2:]), 2)


def _mod(a: int, m: int) -> int:
    dm = m.bit_length()
    if dm == 0:
        raise ZeroDivisionError("reduction modulo the zero polynomial")
    da = a.bit_length()
    while da >= dm:
        a ^= m << (da - dm)
        da = a.bit_length()
    return a


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _mod(a, b)
    return a


def multiply_mod(a: Poly2, b: Poly2, modulus: Poly2) -> Poly2:
    """Return a*b mod modulus over GF(2)."""
    if not modulus:
        raise ZeroDivisionError("modulus is the zero polynomial")
    m = modulus.value
    return Poly2(_mod(_clmul(_mod(a.value, m), _mod(b.value, m)), m))


def poly_mod(a: Poly2, modulus: Poly2) -> Poly2:
    if not modulus:
        raise ZeroDivisionError("modulus is the zero polynomial")
    return Poly2(_mod(a.value, modulus.value))


def poly_gcd(a: Poly2, b: Poly2) -> Poly2:
    return Poly2(_gcd(a.value, b.value))


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> tuple[int, ...]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return tuple(out)


def _rabin(p: int, n: int) -> bool:
    checkpoints = {n // q for q in _prime_factors(n)}
    x = _mod(0b10, p)
    t = x
    for k in range(1, n + 1):
        t = _mod(_square(t), p)
        if k in checkpoints and _gcd(p, t ^ x) != 1:
            return False
    return t == x


@lru_cache(maxsize=None)
def _small_factor_product(max_degree: int) -> int:
    # product of every irreducible of degree 2..max_degree
    prod = 1
    for d in range(2, max_degree + 1):
        for v in range(1 << d, 2 << d):
            if v & 1 and _rabin(v, d):
                prod = _clmul(prod, v)
    return prod


_SIEVE_DEGREE = 6


def is_irreducible(p: Poly2) -> bool:
    """Exact irreducibility test over GF(2)."""
    n = p.degree
    if n < 1:
        raise ValueError("constant polynomials have no irreducibility status")
    if n == 1:
        return True
    v = p.value
    # cheap rejections: divisible by x, or by x + 1 (even number of terms)
    if not v & 1 or bin(v).count("1") % 2 == 0:
        return False
    if n > 2 * _SIEVE_DEGREE and _gcd(v, _small_factor_product(_SIEVE_DEGREE)) != 1:
        return False
    return _rabin(v, n)


def random_irreducible(degree: int, rng: random.Random) -> Poly2:
    """Uniformly sample a monic irreducible polynomial of the given degree.

    Draws the ``degree`` low coefficients uniformly, forces the leading
    one, and retries until the candidate is irreducible.
    """
    if degree < 2:
        raise ValueError("degree must be at least 2")
    top = 1 << degree
    while True:
        cand = Poly2(top | rng.getrandbits(degree))
        if is_irreducible(cand):
            return cand


def count_irreducible(degree: int) -> int:
    """Number of monic irreducible polynomials of a given degree (Gauss' formula)."""
    if degree < 1:
        raise ValueError("degree must be positive")
    total = 0
    for d in range(1, degree + 1):
        if degree % d == 0:
            total += _mobius(d) * 2 ** (degree // d)
    return total // degree


def _mobius(n: int) -> int:
    result = 1
    for q in _prime_factors(n):
        if (n // q) % q == 0:
            return 0
        result = -result
    return result
