import math
import random

import numpy as np
import pytest
from scipy import stats

from circqba.bits import Bits
from circqba.gf2poly import Poly2, is_irreducible, random_irreducible
from circqba.lfsr_toeplitz import HashParams, forgery_bound, lfsr_step, toeplitz_hash
from oracles import (
    long_divmod,
    to_list,
    col_to_vec,
    companion_block_toeplitz,
    explicit_toeplitz,
    matrix_digest,
    poly_vec,
)

P3 = Poly2.from_exponents(3, 1, 0)  # x^3 + x + 1, p = (0, 1, 1)


def _mod(a: int, m: int) -> int:
    rem = long_divmod(to_list(a), to_list(m))[1]
    return sum(c << k for k, c in enumerate(rem))


def test_lfsr_step_hand_example():
    # column (s2, s1, s0) = (1, 0, 1): p . column = 0*1 + 1*0 + 1*1 = 1
    assert int(poly_vec(P3.value, 3) @ col_to_vec(0b101, 3)) % 2 == 1
    assert lfsr_step(0b101, P3) == 0b110


def test_lfsr_step_zero_column():
    assert lfsr_step(0, P3) == 0


def test_lfsr_step_rejects_wrong_length():
    with pytest.raises(ValueError):
        lfsr_step(0b1000, P3)


def test_steps_reproduce_explicit_columns():
    rng = random.Random(3)
    for n in (3, 5, 8, 13):
        poly = random_irreducible(n, rng)
        key = rng.getrandbits(n)
        T = explicit_toeplitz(key, poly.value, n, n + 1)
        col = key
        for k in range(n + 1):
            assert list(col_to_vec(col, n)) == list(T[:, k])
            col = lfsr_step(col, poly)


def test_zero_message_zero_digest():
    params = HashParams(0b101, P3)
    assert toeplitz_hash(params, Bits.zeros(17)) == 0


def test_empty_message_rejected():
    with pytest.raises(ValueError):
        toeplitz_hash(HashParams(0b101, P3), Bits.zeros(0))


def test_linearity():
    rng = random.Random(11)
    for _ in range(200):
        n = rng.randint(2, 40)
        params = HashParams(rng.getrandbits(n), random_irreducible(n, rng))
        length = rng.randint(1, 300)
        a = Bits(rng.getrandbits(length), length)
        b = Bits(rng.getrandbits(length), length)
        assert toeplitz_hash(params, a ^ b) == toeplitz_hash(params, a) ^ toeplitz_hash(params, b)


def test_three_by_four_example():
    params = HashParams(0b101, P3)
    msg = Bits.from_iter([1, 0, 1, 1])
    T = explicit_toeplitz(0b101, P3.value, 3, 4)
    # columns H1..H4 built by hand from the recurrence
    assert T.T.tolist() == [[1, 0, 1], [1, 1, 0], [1, 1, 1], [0, 1, 1]]
    expected = matrix_digest(T, msg)
    assert expected == 0b101 ^ 0b111 ^ 0b011
    assert toeplitz_hash(params, msg) == expected


def test_bytes_are_msb_first():
    params = HashParams(0b101, P3)
    assert toeplitz_hash(params, b"\x80") == toeplitz_hash(params, Bits.from_iter([1, 0, 0, 0, 0, 0, 0, 0]))
    assert toeplitz_hash(params, b"\x80") == 0b101


def test_block_oracle_matches_literal_oracle():
    rng = random.Random(8)
    for _ in range(20):
        n = rng.randint(2, 20)
        poly = random_irreducible(n, rng)
        key = rng.getrandbits(n)
        m = rng.randint(1, 90)
        assert np.array_equal(
            explicit_toeplitz(key, poly.value, n, m), companion_block_toeplitz(key, poly.value, n, m)
        )


def test_forgery_bound_values():
    assert forgery_bound(64, 16) == pytest.approx(2 ** -9)
    assert forgery_bound(64, 16) == pytest.approx(1.953e-3, rel=1e-3)
    assert forgery_bound(1, 2) == 0.5
    assert forgery_bound(2 ** 16, 16) == 1.0
    assert forgery_bound(10 ** 9, 2000) == 10 ** 9 * 2.0 ** -1999


def test_forgery_bound_rejects_tiny_digest():
    with pytest.raises(ValueError):
        forgery_bound(4, 1)


def test_empirical_forgery_at_16_bits():
    # adversary ignorant of (key, poly) guesses (dm, dd) with H(dm) = dd
    rng = random.Random(2024)
    n, m, trials = 16, 64, 100_000
    params = HashParams(rng.getrandbits(n), random_irreducible(n, rng))
    adv = random.Random(77)
    hits = 0
    for _ in range(trials):
        dm = adv.getrandbits(m) or 1
        dd = adv.getrandbits(n)
        hits += toeplitz_hash(params, Bits(dm, m)) == dd
    eps = forgery_bound(m, n)
    freq = hits / trials
    assert freq <= eps + 3 * math.sqrt(eps * (1 - eps) / trials)


def test_digest_uniform_over_family():
    rng = random.Random(5)
    n = 8
    counts = np.zeros(1 << n, dtype=int)
    samples = 1 << 14
    for _ in range(samples):
        params = HashParams(rng.getrandbits(n), random_irreducible(n, rng))
        msg = Bits(rng.getrandbits(24) or 1, 24)
        counts[toeplitz_hash(params, msg)] += 1
    # digest = q(A) s with q the message polynomial; when p | q it is 0,
    # otherwise uniform in s.  So only bin 0 carries excess, bounded by eps.
    eps = forgery_bound(24, n)
    assert counts[0] / samples <= 2 ** -n + eps
    assert stats.chisquare(counts[1:]).pvalue > 1e-3


def test_digest_uniform_when_poly_does_not_divide_message():
    rng = random.Random(6)
    n = 8
    counts = np.zeros(1 << n, dtype=int)
    samples = 1 << 14
    while counts.sum() < samples:
        poly = random_irreducible(n, rng)
        msg = Bits(rng.getrandbits(24) or 1, 24)
        # message bit m_k multiplies x^(k-1), m_1 is the MSB
        q = int(msg.to_str()[::-1], 2)
        if _mod(q, poly.value) == 0:
            continue
        counts[toeplitz_hash(HashParams(rng.getrandbits(n), poly), msg)] += 1
    assert stats.chisquare(counts).pvalue > 1e-3


def test_irreducible_fixture_polys():
    assert is_irreducible(P3)
