"""Byzantine strategies.

All dishonest parties share one seeded random source (collusion), and each
strategy tampers at most ``persistence`` times per protocol step before
falling back to honest behaviour, so restarts eventually succeed unless
the persistence exceeds the retry budget.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, replace

from .bits import Bits
from .gf2poly import _clmul, random_irreducible
from .lfsr_toeplitz import forgery_bound
from .qds import KeyPool, KeyTriple, SignedPackage, derive_session_keys, sign, verify_as_ca

KINDS = (
    "forge_pair",
    "forge_message_only",
    "tamper_hop_sigs",
    "distinct_orders_general",
    "random_hash_forgery",
    "passive",
)
GENERAL_KINDS = ("distinct_orders_general", "passive")
LIEUTENANT_KINDS = tuple(k for k in KINDS if k != "distinct_orders_general")


@dataclass(frozen=True)
class Strategy:
    kind: str
    party: int
    persistence: int = 1
    target: int | None = None  # lieutenant whose order is attacked; None = seeded choice

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        allowed = GENERAL_KINDS if self.party == 0 else LIEUTENANT_KINDS
        if self.kind not in allowed:
            raise ValueError(f"{self.kind} cannot be played by party {self.party}")
        if self.persistence < 0:
            raise ValueError("persistence must be non-negative")


def random_hash_forgery(pkg: SignedPackage, rng: random.Random) -> SignedPackage:
    """Shift message and signature by (t, h) with t != 0, both uniform."""
    L = pkg.message.length
    t = 0
    while not t:
        t = rng.getrandbits(L)
    h = rng.getrandbits(pkg.n)
    return replace(pkg, message=Bits(pkg.message.value ^ t, L), signature=pkg.signature ^ h)


def poly_to_message(poly: int, length: int) -> Bits:
    """Message whose polynomial sum_k m_k x^(k-1) is ``poly`` (m_1 is the first bit)."""
    if poly >> length:
        raise ValueError("polynomial does not fit the message length")
    return Bits(int(format(poly, f"0{length}b")[::-1], 2), length)


def factored_forgery(pkg: SignedPackage, rng: random.Random) -> SignedPackage:
    """Best linear attack: t is a product of distinct degree-n irreducibles, h = 0.

    The digest of t vanishes exactly when the secret polynomial is one of
    the factors, which is how the M * 2^(1-n) bound is approached.
    """
    L, n = pkg.message.length, pkg.n
    count = (L - 1) // n
    if count < 1:
        raise ValueError("message too short to hide a degree-n factor")
    factors, t = set(), 1
    while len(factors) < count:
        p = random_irreducible(n, rng).value
        if p not in factors:
            factors.add(p)
            t = _clmul(t, p)
    delta = poly_to_message(t, L)
    return replace(pkg, message=Bits(pkg.message.value ^ delta.value, L))


FORGERY_ATTACKS = {"random": random_hash_forgery, "factored": factored_forgery}


@dataclass(frozen=True)
class ForgeReport:
    n: int
    msg_bits: int
    trials: int
    successes: int
    strategy: str
    bound: float

    @property
    def frequency(self) -> float:
        return self.successes / self.trials

    @property
    def sigma(self) -> float:
        p = self.bound
        return (p * (1 - p) / self.trials) ** 0.5

    def within_bound(self, k: float = 3.0) -> bool:
        return self.frequency <= self.bound + k * self.sigma


def forge_bench(n: int, msg_bits: int, trials: int, strategy: str = "random", seed=0) -> ForgeReport:
    """Fraction of forged packages a CA accepts, each trial a fresh QDS session."""
    if trials < 1:
        raise ValueError("need at least one trial")
    attack = FORGERY_ATTACKS[strategy]
    rng = random.Random(f"{seed}:forge-bench:{strategy}")
    sf = KeyPool("S-F", seed=f"{seed}:forge-bench:sf")
    sv = KeyPool("S-V", seed=f"{seed}:forge-bench:sv")
    wins = 0
    for k in range(trials):
        keys = derive_session_keys(sf, sv, n, purpose="")
        pkg = sign(keys.signer, Bits(rng.getrandbits(msg_bits), msg_bits), rng, session_id=k)
        forged = attack(pkg, rng)
        if forged.message != pkg.message and verify_as_ca(forged, keys.verifier, keys.forwarder):
            wins += 1
        # keep the allocation log from growing without bound
        sf.allocations.clear()
        sv.allocations.clear()
    return ForgeReport(n, msg_bits, trials, wins, strategy, forgery_bound(msg_bits, n))


class Adversary:
    def __init__(self, strategies=(), seed=0):
        self.strategies: dict[int, Strategy] = {}
        for s in strategies:
            if s.party in self.strategies:
                raise ValueError(f"party {s.party} has two strategies")
            self.strategies[s.party] = s
        self.rng = random.Random(f"{seed}:adversary")
        self._tampers = Counter()
        self.log: list[tuple] = []

    @property
    def parties(self) -> frozenset:
        return frozenset(self.strategies)

    def kind(self, party: int) -> str:
        s = self.strategies.get(party)
        return s.kind if s else "passive"

    def _budget(self, party: int, step) -> bool:
        s = self.strategies.get(party)
        if s is None or s.kind == "passive":
            return False
        key = (party, step)
        if self._tampers[key] >= s.persistence:
            return False
        self._tampers[key] += 1
        return True

    # -- phase 1 ---------------------------------------------------------------
    def general_orders(self, lieutenants, default: Bits) -> dict[int, Bits]:
        if self.kind(0) != "distinct_orders_general":
            return {i: default for i in lieutenants}
        m = default.length
        out = {}
        used = set()
        for i in lieutenants:
            v = self.rng.getrandbits(m)
            # keep the orders pairwise distinct while the order space allows it
            tries = 0
            while v in used and tries < 64 and len(used) < 2 ** m:
                v = self.rng.getrandbits(m)
                tries += 1
            used.add(v)
            out[i] = Bits(v, m)
        self.log.append(("general_orders", 0, tuple(b.value for b in out.values())))
        return out

    # -- forwarding to the CA --------------------------------------------------
    def on_forward(self, party: int, pkg: SignedPackage, view, step) -> tuple[SignedPackage, bool]:
        if self.kind(party) != "random_hash_forgery" or not self._budget(party, step):
            return pkg, False
        self.log.append(("random_hash_forgery", party, step))
        return random_hash_forgery(pkg, self.rng), True

    # -- signing a gathering hop ---------------------------------------------------
    def on_sign_gather(self, party: int, state, view, step):
        """Return (state to sign, tampered flag)."""
        kind = self.kind(party)
        if kind not in ("forge_pair", "forge_message_only", "tamper_hop_sigs"):
            return state, False
        if kind == "tamper_hop_sigs" and not state.hop_sigs:
            return state, False
        if not self._budget(party, step):
            return state, False
        n = state.n
        if kind == "tamper_hop_sigs":
            k = self.rng.randrange(len(state.hop_sigs))
            sigs = list(state.hop_sigs)
            sigs[k] ^= 1 << self.rng.randrange(n)
            self.log.append((kind, party, step, k))
            return replace(state, hop_sigs=tuple(sigs)), True
        k = self._target(party, state)
        msgs = list(state.messages)
        old = msgs[k]
        delta = 0
        while not delta:
            delta = self.rng.getrandbits(old.length)
        msgs[k] = Bits(old.value ^ delta, old.length)
        gen = list(state.general_sigs)
        if kind == "forge_pair":
            # a self-made signature under keys the adversary invents
            fake = KeyTriple(self.rng.getrandbits(n), self.rng.getrandbits(n), self.rng.getrandbits(n), n,
                             owner=f"forger{party}")
            gen[k] = sign(fake, msgs[k], self.rng).signature
        self.log.append((kind, party, step, state.holders[k]))
        return replace(state, messages=tuple(msgs), general_sigs=tuple(gen)), True

    def _target(self, party: int, state) -> int:
        t = self.strategies[party].target
        if t is not None and t in state.holders:
            return state.holders.index(t)
        return self.rng.randrange(len(state.holders))

    def apply(self, strategy: Strategy, role_view, traffic, step=None):
        """Generic entry point: route ``traffic`` through ``strategy``.

        ``traffic`` is a ``SignedPackage`` (forwarding), a gathering state
        (signing a hop) or a lieutenant list (the general's orders, with a
        default order given as ``(lieutenants, default)``).
        """
        if strategy.party != role_view.party:
            raise ValueError("strategy bound to a different role")
        self.strategies.setdefault(strategy.party, strategy)
        if isinstance(traffic, SignedPackage):
            return self.on_forward(strategy.party, traffic, role_view, step)[0]
        if isinstance(traffic, tuple) and len(traffic) == 2:
            return self.general_orders(*traffic)
        return self.on_sign_gather(strategy.party, traffic, role_view, step)[0]
