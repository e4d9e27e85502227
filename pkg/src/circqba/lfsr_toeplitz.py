"""LFSR-based Toeplitz hashing over GF(2).

The hash family is indexed by an N-bit key s and a degree-N irreducible
polynomial p(x) = x^N + p_{N-1} x^{N-1} + ... + p_0.  Column vectors are
ints with bit i holding the entry paired with p_i, so the top entry of a
column is bit N-1.  The columns of the N x M Toeplitz matrix are

    H_1 = s,   H_{k+1} = lfsr_step(H_k, p)

and the digest of an M-bit message m_1..m_M is the XOR of the H_k whose
m_k is set.  Nothing of size N x M is ever materialised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .bits import Bits
from .gf2poly import Poly2

Message = Union[Bits, bytes]


@dataclass(frozen=True)
class HashParams:
    """Key and polynomial selecting one member of the hash family.

    Irreducibility of ``poly`` is the caller's responsibility; QDS
    verification tests it explicitly because a reducible recovery is
    evidence of tampering.
    """

    key: int
    poly: Poly2
    max_msg_len: int | None = None

    def __post_init__(self):
        n = self.poly.degree
        if n < 1:
            raise ValueError("polynomial degree must be at least 1")
        if self.key < 0 or self.key >> n:
            raise ValueError(f"key must fit in {n} bits")

    @property
    def digest_len(self) -> int:
        return self.poly.degree


def lfsr_step(column: int, poly: Poly2) -> int:
    """Advance one Toeplitz column: new top entry is p . column, rest shifts down."""
    n = poly.degree
    if column < 0 or column >> n:
        raise ValueError(f"column does not have length {n}")
    fb = (column & poly.low_coeffs).bit_count() & 1
    return (column >> 1) | (fb << (n - 1))


def _as_bits(message: Message) -> Bits:
    if isinstance(message, (bytes, bytearray)):
        return Bits.from_bytes(bytes(message))
    return message


def toeplitz_hash(params: HashParams, message: Message) -> int:
    """N-bit digest of ``message``; byte payloads are read MSB first."""
    bits = _as_bits(message)
    if bits.length == 0:
        raise ValueError("cannot hash an empty message")
    if params.max_msg_len is not None and bits.length > params.max_msg_len:
        raise ValueError("message longer than max_msg_len")
    top = params.poly.degree - 1
    taps = params.poly.low_coeffs
    col = params.key
    digest = 0
    for b in bits.to_str():
        if b == "1":
            digest ^= col
        col = (col >> 1) | (((col & taps).bit_count() & 1) << top)
    return digest


def forgery_bound(msg_len: int, digest_len: int) -> float:
    """M * 2^(1-N), clamped to 1."""
    if msg_len < 1:
        raise ValueError("message length must be positive")
    if digest_len < 2:
        raise ValueError("digest length must be at least 2")
    if math.log2(msg_len) + 1 - digest_len >= 0:
        return 1.0
    return math.ldexp(msg_len, 1 - digest_len)
