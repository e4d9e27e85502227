"""One-time universal-hashing quantum digital signatures (three parties).

Roles are signer, forwarder and verifier.  Each session uses fresh key
triples (X, Y, Z) with the signer's triple equal to the XOR of the other
two, so neither receiver alone knows the signing keys.  Signing samples an
irreducible polynomial p_s, hashes the message with H_{X_S, p_s}, pads the
digest with Y_S and the low coefficients of p_s with Z_S.

Key bits come out of ``KeyPool`` objects, which model the output buffer of
a key generation protocol on one quantum link and refuse to hand out the
same bit twice.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .bits import Bits, int_to_bytes
from .gf2poly import Poly2, is_irreducible, random_irreducible
from .lfsr_toeplitz import HashParams, toeplitz_hash


class KeyExhaustedError(RuntimeError):
    """A key pool cannot supply the requested number of fresh bits."""


class KeyReuseError(RuntimeError):
    """A one-time key triple was used a second time."""


_triple_ids = itertools.count(1)


@dataclass(eq=False)
class KeyTriple:
    x: int
    y: int
    z: int
    n: int
    owner: str = ""
    spent: bool = False
    uid: int = field(default_factory=lambda: next(_triple_ids))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("key length must be positive")
        for part in (self.x, self.y, self.z):
            if part < 0 or part >> self.n:
                raise ValueError(f"key part does not fit in {self.n} bits")

    def consume(self) -> None:
        if self.spent:
            raise KeyReuseError(f"key triple {self.uid} ({self.owner}) already used")
        self.spent = True

    def combine(self, other: KeyTriple, owner: str = "") -> KeyTriple:
        """Bitwise XOR with another triple; the result is a fresh, unspent object."""
        if other.n != self.n:
            raise ValueError("key length mismatch")
        return KeyTriple(self.x ^ other.x, self.y ^ other.y, self.z ^ other.z, self.n, owner)

    def same_bits(self, other: KeyTriple) -> bool:
        return (self.n, self.x, self.y, self.z) == (other.n, other.x, other.y, other.z)

    def to_bytes(self) -> bytes:
        return b"".join(int_to_bytes(v, self.n) for v in (self.x, self.y, self.z))


@dataclass
class Allocation:
    pool: str
    offset: int
    length: int
    purpose: str


class KeyPool:
    """One-time supply of secret bits shared over a single quantum link.

    Either wraps a fixed ``Bits`` buffer or draws from a seeded generator
    (optionally capped at ``capacity`` bits).  Every allocation is logged
    with its offset so disjointness can be audited.
    """

    def __init__(self, name: str, bits: Bits | None = None, seed=None,
                 capacity: int | None = None):
        if bits is not None and seed is not None:
            raise ValueError("give either fixed bits or a seed, not both")
        self.name = name
        self._bits = bits
        self._rng = random.Random(seed) if bits is None else None
        if bits is not None:
            capacity = len(bits) if capacity is None else min(capacity, len(bits))
        self.capacity = capacity
        self.used = 0
        self.allocations: list[Allocation] = []

    def available(self) -> int | None:
        return None if self.capacity is None else self.capacity - self.used

    def can_supply(self, nbits: int) -> bool:
        return self.capacity is None or self.used + nbits <= self.capacity

    def take(self, nbits: int, purpose: str = "") -> int:
        if nbits < 0:
            raise ValueError("negative allocation")
        if not self.can_supply(nbits):
            raise KeyExhaustedError(
                f"pool {self.name}: need {nbits} bits, {self.available()} left")
        if self._bits is not None:
            out = self._bits.slice(self.used, self.used + nbits).value
        else:
            out = self._rng.getrandbits(nbits) if nbits else 0
        self.allocations.append(Allocation(self.name, self.used, nbits, purpose))
        self.used += nbits
        return out


def _triple_from(pool: KeyPool, n: int, owner: str, purpose: str) -> KeyTriple:
    raw = pool.take(3 * n, purpose)
    mask = (1 << n) - 1
    return KeyTriple(raw >> 2 * n, (raw >> n) & mask, raw & mask, n, owner)


@dataclass
class SessionKeys:
    signer: KeyTriple
    forwarder: KeyTriple
    verifier: KeyTriple

    def __post_init__(self):
        if not self.signer.same_bits(self.forwarder.combine(self.verifier)):
            raise ValueError("signer keys are not the XOR of forwarder and verifier keys")

    @property
    def n(self) -> int:
        return self.signer.n


def derive_session_keys(pairwise_key_sf: KeyPool, pairwise_key_sv: KeyPool, n: int,
                        purpose: str = "") -> SessionKeys:
    """Forwarder keys from the signer-forwarder link, verifier keys from the
    signer-verifier link, signer keys as their XOR."""
    if not (pairwise_key_sf.can_supply(3 * n) and pairwise_key_sv.can_supply(3 * n)):
        raise KeyExhaustedError(f"cannot draw {3 * n} bits from both pools")
    fwd = _triple_from(pairwise_key_sf, n, "forwarder", purpose)
    ver = _triple_from(pairwise_key_sv, n, "verifier", purpose)
    return SessionKeys(fwd.combine(ver, "signer"), fwd, ver)


def star_session_keys(signer_link: KeyPool, forwarder_link: KeyPool, n: int,
                      purpose: str = "") -> SessionKeys:
    """Key triples when every quantum link ends at the verifier (the CA).

    The signer's triple comes from its own link, the forwarder's from the
    forwarder's link, and the CA holds both ends so its triple is their XOR.
    The XOR relation is the same as in ``derive_session_keys``.
    """
    if signer_link is forwarder_link:
        raise ValueError("signer and forwarder must use different links")
    if not (signer_link.can_supply(3 * n) and forwarder_link.can_supply(3 * n)):
        raise KeyExhaustedError(f"cannot draw {3 * n} bits from both links")
    sig = _triple_from(signer_link, n, "signer", purpose)
    fwd = _triple_from(forwarder_link, n, "forwarder", purpose)
    return SessionKeys(sig, fwd, sig.combine(fwd, "verifier"))


@dataclass(frozen=True)
class SignedPackage:
    session_id: int
    message: Bits
    signature: int
    encrypted_poly: int
    n: int

    def __post_init__(self):
        for part in (self.signature, self.encrypted_poly):
            if part < 0 or part >> self.n:
                raise ValueError(f"signature fields must fit in {self.n} bits")
        if not 0 <= self.session_id < 1 << 64:
            raise ValueError("session id must fit in 8 bytes")

    def serialize(self) -> bytes:
        """session_id (8B BE) | message bit-length (8B BE) | message | Sig | p."""
        return b"".join((
            self.session_id.to_bytes(8, "big"),
            self.message.length.to_bytes(8, "big"),
            self.message.to_bytes(),
            int_to_bytes(self.signature, self.n),
            int_to_bytes(self.encrypted_poly, self.n),
        ))

    @classmethod
    def deserialize(cls, data: bytes, n: int) -> SignedPackage:
        w = (n + 7) // 8
        sid = int.from_bytes(data[:8], "big")
        mlen = int.from_bytes(data[8:16], "big")
        mbytes = (mlen + 7) // 8
        if len(data) != 16 + mbytes + 2 * w:
            raise ValueError("truncated or oversized package")
        raw = int.from_bytes(data[16:16 + mbytes], "big") >> (8 * mbytes - mlen)
        sig = int.from_bytes(data[16 + mbytes:16 + mbytes + w], "big")
        enc = int.from_bytes(data[16 + mbytes + w:], "big")
        return cls(sid, Bits(raw, mlen), sig, enc, n)

    @property
    def message_bytes(self) -> bytes:
        return self.message.to_bytes()


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted


def _as_bits(message) -> Bits:
    if isinstance(message, (bytes, bytearray)):
        return Bits.from_bytes(bytes(message))
    return message


def sign(keys: KeyTriple, message, poly_seed: random.Random, session_id: int = 0) -> SignedPackage:
    msg = _as_bits(message)
    if msg.length == 0:
        raise ValueError("cannot sign an empty message")
    keys.consume()
    n = keys.n
    poly = random_irreducible(n, poly_seed)
    dig = toeplitz_hash(HashParams(keys.x, poly), msg)
    return SignedPackage(session_id, msg, dig ^ keys.y, poly.low_coeffs ^ keys.z, n)


def check_with_signer_keys(pkg: SignedPackage, signer: KeyTriple) -> Verdict:
    """Digest check given the full signer triple; does not consume anything."""
    if signer.n != pkg.n:
        return Verdict(False, "key length mismatch")
    if pkg.message.length == 0:
        return Verdict(False, "empty message")
    poly = Poly2((1 << pkg.n) | (pkg.encrypted_poly ^ signer.z))
    if not is_irreducible(poly):
        return Verdict(False, "recovered polynomial is reducible")
    expected = pkg.signature ^ signer.y
    actual = toeplitz_hash(HashParams(signer.x, poly), pkg.message)
    if expected != actual:
        return Verdict(False, "digest mismatch")
    return Verdict(True)


def _verify(pkg: SignedPackage, own: KeyTriple, other: KeyTriple) -> Verdict:
    if own.n != other.n:
        raise ValueError("key length mismatch")
    own.consume()
    return check_with_signer_keys(pkg, own.combine(other))


def verify_as_forwarder(pkg: SignedPackage, own: KeyTriple,
                        received_verifier_keys: KeyTriple) -> Verdict:
    return _verify(pkg, own, received_verifier_keys)


def verify_as_ca(pkg: SignedPackage, own: KeyTriple,
                 received_forwarder_keys: KeyTriple) -> Verdict:
    return _verify(pkg, own, received_forwarder_keys)


def signature_rate(key_rate_bits_per_s: float, n: int) -> float:
    """Signatures per second when each one costs 3n key bits."""
    if n < 1:
        raise ValueError("signature length must be positive")
    return key_rate_bits_per_s / (3 * n)
