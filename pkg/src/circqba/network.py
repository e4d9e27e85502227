"""Deterministic simulated network: logical clock, event log, star key links.

Every delivery is an ``Event`` ordered by (tick, seq).  Classical channels
are authenticated, so a payload may only differ from what the sender's
honest code produced if the sender is dishonest; ``send`` enforces this.
Key material is tracked as secrets with an owner and an explicit release
list, and every delivery to a dishonest party is scanned for unreleased
honest keys (the taint assertion).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .qds import KeyPool, KeyTriple

CA = -1
CLASSICAL = "classical_auth"
KEY_DELIVERY = "key_delivery"


class CapabilityError(AssertionError):
    """A party saw or did something its role is not allowed to."""


def party_name(pid: int) -> str:
    if pid == CA:
        return "CA"
    if pid == 0:
        return "S"
    return f"R{pid}"


@dataclass(frozen=True)
class Event:
    tick: int
    seq: int
    source: int
    destination: int
    channel: str
    kind: str
    payload: bytes
    tampered: bool = False


@dataclass(frozen=True)
class Topology:
    """Quantum links form a star through the CA, classical links a complete graph."""

    N: int

    @property
    def quantum_links(self) -> list[tuple[int, int]]:
        return [(p, CA) for p in range(self.N)]

    @property
    def classical_links(self) -> list[tuple[int, int]]:
        parties = [CA, *range(self.N)]
        return [(a, b) for a in parties for b in parties if a < b]


# triples shorter than this are skipped by the taint scan: a short byte
# string turns up in unrelated payloads by chance
TAINT_MIN_BYTES = 8


@dataclass
class _Secret:
    owner: int
    raw: bytes
    released: set = field(default_factory=set)


class Network:
    def __init__(self, N: int, dishonest=(), seed=0, link_capacity: int | None = None,
                 taint_checks: bool = True):
        self.N = N
        self.topology = Topology(N)
        self.dishonest = frozenset(dishonest)
        if CA in self.dishonest:
            raise CapabilityError("a dishonest CA is outside the modelled threat")
        self.seed = seed
        self.tick = 0
        self.events: list[Event] = []
        self.taint_checks = taint_checks
        self._seq = 0
        self._session = 0
        self.links = {p: KeyPool(f"{party_name(p)}-CA", seed=f"{seed}:link:{p}",
                                 capacity=link_capacity)
                      for p, _ in self.topology.quantum_links}
        self._poly_rngs: dict[int, random.Random] = {}
        self._secrets: dict[int, _Secret] = {}   # by triple uid
        self._held: dict[int, list[KeyTriple]] = {p: [] for p in [CA, *range(N)]}

    # -- bookkeeping ---------------------------------------------------------
    def honest(self, pid: int) -> bool:
        return pid not in self.dishonest

    def advance(self) -> int:
        self.tick += 1
        return self.tick

    def next_session_id(self) -> int:
        self._session += 1
        return self._session

    def poly_rng(self, pid: int) -> random.Random:
        if pid not in self._poly_rngs:
            self._poly_rngs[pid] = random.Random(f"{self.seed}:poly:{pid}")
        return self._poly_rngs[pid]

    def links_used(self) -> list[int]:
        return sorted(p for p, pool in self.links.items() if pool.allocations)

    def allocations(self):
        for p in sorted(self.links):
            yield from self.links[p].allocations

    # -- delivery ------------------------------------------------------------
    def _log(self, src, dst, channel, kind, payload, tampered) -> Event:
        ev = Event(self.tick, self._seq, src, dst, channel, kind, payload, tampered)
        self._seq += 1
        self.events.append(ev)
        return ev

    def send(self, src: int, dst: int, kind: str, payload: bytes, tampered: bool = False) -> bytes:
        if src == dst:
            raise ValueError("self-delivery")
        if tampered and self.honest(src):
            raise CapabilityError(f"{party_name(src)} is honest but its traffic was altered")
        if self.taint_checks and not self.honest(dst):
            self._taint(dst, payload)
        self._log(src, dst, CLASSICAL, kind, payload, tampered)
        return payload

    def deliver_keys(self, pid: int, triple: KeyTriple) -> None:
        """Key generation hands a triple to ``pid`` over its CA link."""
        self.own(pid, triple)
        if pid != CA:
            self._log(CA, pid, KEY_DELIVERY, "keys", triple.to_bytes(), False)

    def own(self, pid: int, triple: KeyTriple) -> None:
        self._secrets.setdefault(triple.uid, _Secret(pid, triple.to_bytes()))
        self._held[pid].append(triple)

    def announce(self, src: int, dst: int, triple: KeyTriple) -> None:
        """Post-signature key announcement; releases the triple to ``dst``."""
        secret = self._secrets.get(triple.uid)
        if secret is None or secret.owner != src:
            raise CapabilityError(f"{party_name(src)} announced keys it does not own")
        secret.released.add(dst)
        self._held[dst].append(triple)
        self.send(src, dst, "announce", triple.to_bytes())

    def _taint(self, dst: int, payload: bytes) -> None:
        for secret in self._secrets.values():
            if secret.owner == dst or dst in secret.released or not self.honest(secret.owner):
                continue
            if len(secret.raw) >= TAINT_MIN_BYTES and secret.raw in payload:
                raise CapabilityError(
                    f"honest key material of {party_name(secret.owner)} reached {party_name(dst)}")

    def view(self, pid: int) -> RoleView:
        if self.honest(pid):
            raise CapabilityError("only dishonest parties get adversary views")
        return RoleView(pid, tuple(self._held[pid]))


@dataclass(frozen=True)
class RoleView:
    """What a dishonest party legitimately holds."""

    party: int
    keys: tuple

    def assert_holds(self, triple: KeyTriple) -> None:
        if not any(t is triple for t in self.keys):
            raise CapabilityError(f"{party_name(self.party)} used keys outside its view")
