"""Fixed-length bit strings.

A ``Bits`` value is an ordered sequence of bits b_1 .. b_L stored in a
Python int with b_1 as the most significant bit.  Byte payloads expand
most-significant-bit first, so ``Bits.from_bytes(b"\\x80")`` is the
sequence 1,0,0,0,0,0,0,0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True)
class Bits:
    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative length")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def from_bytes(cls, data: bytes) -> Bits:
        return cls(int.from_bytes(data, "big"), 8 * len(data))

    @classmethod
    def from_iter(cls, bits: Iterable[int]) -> Bits:
        value = 0
        length = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"not a bit: {b!r}")
            value = (value << 1) | b
            length += 1
        return cls(value, length)

    @classmethod
    def from_int(cls, value: int, length: int) -> Bits:
        return cls(value, length)

    @classmethod
    def zeros(cls, length: int) -> Bits:
        return cls(0, length)

    def __len__(self) -> int:
        return self.length

    def __iter__(self) -> Iterator[int]:
        for i in range(self.length - 1, -1, -1):
            yield (self.value >> i) & 1

    def __getitem__(self, index: int) -> int:
        if not -self.length <= index < self.length:
            raise IndexError(index)
        index %= self.length
        return (self.value >> (self.length - 1 - index)) & 1

    def __xor__(self, other: Bits) -> Bits:
        if self.length != other.length:
            raise ValueError("length mismatch")
        return Bits(self.value ^ other.value, self.length)

    def __add__(self, other: Bits) -> Bits:
        """Concatenation."""
        return Bits((self.value << other.length) | other.value, self.length + other.length)

    def slice(self, start: int, stop: int) -> Bits:
        if not 0 <= start <= stop <= self.length:
            raise IndexError((start, stop))
        width = stop - start
        return Bits((self.value >> (self.length - stop)) & ((1 << width) - 1), width)

    def to_str(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def to_bytes(self) -> bytes:
        """Left-aligned, zero-padded at the end to a whole number of bytes."""
        nbytes = (self.length + 7) // 8
        pad = 8 * nbytes - self.length
        return (self.value << pad).to_bytes(nbytes, "big")


def concat(parts: Iterable[Bits]) -> Bits:
    value = 0
    length = 0
    for p in parts:
        value = (value << p.length) | p.value
        length += p.length
    return Bits(value, length)


def int_to_bytes(value: int, nbits: int) -> bytes:
    """Big-endian encoding of an nbits-wide unsigned integer."""
    return value.to_bytes((nbits + 7) // 8, "big")
