"""Circular QBA: order distribution, circular gathering, consensus output.

Parties are numbered 0 (the commanding general S), 1..N-1 (lieutenants)
and -1 (the CA).  Every message transfer is a three-party QDS with the CA
as verifier; the CA keeps an append-only ledger of accepted signatures and
their key triples and uses it to audit everything embedded in a gathering
package.  Any failed check restarts the current step with fresh keys, up
to ``retry_budget`` times.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable

from .adversary import Adversary
from .bits import Bits, concat
from .network import CA, Network, party_name
from .qds import (
    KeyExhaustedError,
    SessionKeys,
    SignedPackage,
    Verdict,
    check_with_signer_keys,
    sign,
    star_session_keys,
    verify_as_ca,
    verify_as_forwarder,
)

DEFAULT_RETRY_BUDGET = 32


class RoundAborted(RuntimeError):
    def __init__(self, msg: str, step=None):
        super().__init__(msg)
        self.step = step


@dataclass(frozen=True)
class RoleConfig:
    N: int
    f: int
    general_honest: bool = True
    dishonest: frozenset = frozenset()  # lieutenant indices, tau_d
    m: int = 16
    n: int = 32

    def __post_init__(self):
        object.__setattr__(self, "dishonest", frozenset(self.dishonest))
        if self.N < 3:
            raise ValueError("need a general and at least two lieutenants")
        if any(not 1 <= j <= self.N - 1 for j in self.dishonest):
            raise ValueError("dishonest indices must be lieutenants 1..N-1")
        if len(self.dishonest) + (0 if self.general_honest else 1) > self.f:
            raise ValueError("more dishonest parties than f")
        if self.m < 1 or self.n < 2:
            raise ValueError("need m >= 1 and n >= 2")

    @property
    def lieutenants(self) -> range:
        return range(1, self.N)

    @property
    def dishonest_parties(self) -> frozenset:
        return self.dishonest | (frozenset() if self.general_honest else {0})

    @property
    def honest_lieutenants(self) -> list[int]:
        return [i for i in self.lieutenants if i not in self.dishonest]

    def secure(self) -> bool:
        return self.N >= self.f + 2


@dataclass(frozen=True)
class OrderList:
    message: Bits
    signature: int
    n: int

    def __post_init__(self):
        if self.signature < 0 or self.signature >> self.n:
            raise ValueError("signature length must be n")


@dataclass(frozen=True)
class GatherState:
    """G^i after some hops: orders, the general's signatures, hop signatures."""

    initiator: int
    n: int
    holders: tuple = ()      # lieutenant whose order sits at each position
    messages: tuple = ()
    general_sigs: tuple = ()
    hop_sigs: tuple = ()

    def __post_init__(self):
        if not (len(self.holders) == len(self.messages) == len(self.general_sigs)):
            raise ValueError("orders and general signatures must pair up")
        if not len(self.messages) - 1 <= len(self.hop_sigs) <= len(self.messages):
            raise ValueError("hop signatures out of step with orders")

    @property
    def current_hop(self) -> int:
        return len(self.hop_sigs)

    def with_order(self, holder: int, order: OrderList) -> GatherState:
        return GatherState(self.initiator, self.n, self.holders + (holder,),
                           self.messages + (order.message,),
                           self.general_sigs + (order.signature,), self.hop_sigs)

    def with_hop_sig(self, sig: int) -> GatherState:
        return GatherState(self.initiator, self.n, self.holders, self.messages,
                           self.general_sigs, self.hop_sigs + (sig,))

    def signing_input(self) -> Bits:
        """Orders | general signatures | previous hop signatures."""
        n = self.n
        return concat([*self.messages,
                       *(Bits(s, n) for s in self.general_sigs),
                       *(Bits(s, n) for s in self.hop_sigs)])

    @classmethod
    def parse(cls, initiator: int, holders: tuple, order_len: int, n: int, data: Bits) -> GatherState:
        """Inverse of ``signing_input`` for uniform order length."""
        s = len(holders)
        if data.length != s * order_len + (2 * s - 1) * n:
            raise ValueError("signing input has the wrong length")
        pos = 0

        def take(width):
            nonlocal pos
            out = data.slice(pos, pos + width)
            pos += width
            return out

        msgs = tuple(take(order_len) for _ in range(s))
        gen = tuple(take(n).value for _ in range(s))
        hops = tuple(take(n).value for _ in range(s - 1))
        return cls(initiator, n, tuple(holders), msgs, gen, hops)

    def final_orders(self) -> list[Bits]:
        """F^i in lieutenant-index order."""
        return [m for _, m in sorted(zip(self.holders, self.messages), key=lambda t: t[0])]


@dataclass(frozen=True)
class CaEntry:
    package: SignedPackage
    keys: SessionKeys


class CaRecord:
    """Append-only ledger keyed by (round, phase, signer, initiator, hop)."""

    def __init__(self):
        self._entries: dict[tuple, CaEntry] = {}
        self.order: list[tuple] = []

    def append(self, key: tuple, entry: CaEntry) -> None:
        if key in self._entries:
            raise KeyError(f"ledger entry {key} already exists")
        self._entries[key] = entry
        self.order.append(key)

    def get(self, key: tuple) -> CaEntry | None:
        return self._entries.get(key)

    @property
    def entries(self):
        return MappingProxyType(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def to_log(self) -> bytes:
        """Length-prefixed canonical serializations, in append order."""
        out = bytearray()
        for key in self.order:
            raw = self._entries[key].package.serialize()
            out += len(raw).to_bytes(4, "big") + raw
        return bytes(out)


@dataclass(frozen=True)
class QdsAttempt:
    round: int
    phase: int
    initiator: int
    hop: int
    signer: int
    forwarder: int
    attempt: int
    session_id: int
    forwarder_verdict: bool
    ca_verdict: bool
    accepted: bool
    reason: str
    tampered: bool
    msg_bits: int


def majority_output(messages) -> Bits:
    """Most frequent message; ties go to the lexicographically smallest bit string."""
    counts = Counter(messages)
    top = max(counts.values())
    return min((m for m, c in counts.items() if c == top), key=lambda b: b.to_str())


@dataclass
class RoundResult:
    config: RoleConfig
    m0: Bits
    outputs: dict
    gathered: dict
    attempts: list
    ledger: CaRecord
    aborted: bool = False
    abort_reason: str = ""

    @property
    def qds_invocations(self) -> int:
        return sum(a.accepted for a in self.attempts)

    @property
    def restarts(self) -> int:
        return sum(not a.accepted for a in self.attempts)

    @property
    def honest_outputs(self) -> dict:
        return {i: self.outputs[i] for i in self.config.honest_lieutenants if i in self.outputs}

    @property
    def ic1(self) -> bool | None:
        if self.aborted:
            return None
        return len(set(self.honest_outputs.values())) <= 1

    @property
    def ic2(self) -> bool | None:
        if self.aborted or not self.config.general_honest:
            return None
        return all(v == self.m0 for v in self.honest_outputs.values())

    @property
    def forgeries(self) -> int:
        return sum(a.accepted and a.tampered for a in self.attempts)


class _Round:
    def __init__(self, config: RoleConfig, adversary, net: Network, round_id: int,
                 retry_budget: int, output_fn: Callable):
        self.cfg = config
        self.adv = adversary
        self.net = net
        self.round = round_id
        self.budget = retry_budget
        self.output_fn = output_fn
        self.ledger = CaRecord()
        self.attempts: list[QdsAttempt] = []
        self.orders: dict[int, OrderList] = {}

    def dishonest(self, pid: int) -> bool:
        return not self.net.honest(pid)

    def _keys(self, signer: int, forwarder: int) -> SessionKeys:
        keys = star_session_keys(self.net.links[signer], self.net.links[forwarder], self.cfg.n,
                                 purpose=f"r{self.round}:{party_name(signer)}->{party_name(forwarder)}")
        self.net.deliver_keys(signer, keys.signer)
        self.net.deliver_keys(forwarder, keys.forwarder)
        self.net.own(CA, keys.verifier)
        return keys

    def _qds(self, phase, initiator, hop, signer, forwarder, message: Bits, tampered_sign: bool,
             ca_audit: Callable[[SignedPackage], Verdict] | None, attempt: int):
        """One signer -> forwarder -> CA transfer.  Returns (accepted package or None)."""
        net = self.net
        net.advance()
        keys = self._keys(signer, forwarder)
        sid = net.next_session_id()
        pkg = sign(keys.signer, message, net.poly_rng(signer), session_id=sid)
        net.send(signer, forwarder, "qds", pkg.serialize(), tampered=tampered_sign)
        step = (self.round, phase, initiator, hop)
        sub, tampered_fwd = pkg, False
        if self.dishonest(forwarder):
            sub, tampered_fwd = self.adv.on_forward(forwarder, pkg, net.view(forwarder), step)
        net.send(forwarder, CA, "submit", sub.serialize(), tampered=tampered_fwd)
        # forwarder announces first, then the CA
        net.announce(forwarder, CA, keys.forwarder)
        net.announce(CA, forwarder, keys.verifier)
        f_ok = verify_as_forwarder(pkg, keys.forwarder, keys.verifier)
        ca_ok = verify_as_ca(sub, keys.verifier, keys.forwarder)
        reason = ""
        if ca_ok and ca_audit is not None:
            ca_ok = ca_audit(sub)
        if not ca_ok:
            reason = f"CA: {ca_ok.reason}"
        elif not f_ok and not self.dishonest(forwarder):
            reason = f"forwarder: {f_ok.reason}"
        accepted = not reason
        verdict = b"accept" if accepted else b"restart"
        net.send(CA, signer, "verdict", verdict)
        net.send(CA, forwarder, "verdict", verdict)
        self.attempts.append(QdsAttempt(self.round, phase, initiator, hop, signer, forwarder, attempt,
                                        sid, bool(f_ok), bool(ca_ok), accepted, reason,
                                        tampered_sign or tampered_fwd, message.length))
        if accepted:
            self.ledger.append((self.round, phase, signer, initiator, hop), CaEntry(sub, keys))
            return sub
        return None

    # -- phase 1 -------------------------------------------------------------
    def distribute(self, m0: Bits) -> None:
        cfg = self.cfg
        if cfg.general_honest:
            planned = {i: m0 for i in cfg.lieutenants}
        else:
            planned = self.adv.general_orders(list(cfg.lieutenants), m0)
        for i in cfg.lieutenants:
            for attempt in range(self.budget + 1):
                pkg = self._qds(1, i, 0, 0, i, planned[i], False, None, attempt)
                if pkg is not None:
                    self.orders[i] = OrderList(pkg.message, pkg.signature, cfg.n)
                    break
            else:
                raise RoundAborted(f"order distribution to {party_name(i)} exceeded the retry budget",
                                   (1, i, 0))

    # -- phase 2 -------------------------------------------------------------
    def ring(self, i: int) -> list[int]:
        L = self.cfg.N - 1
        return [(i - 1 + k) % L + 1 for k in range(L)]

    def _audit(self, initiator: int, holders: tuple):
        cfg = self.cfg

        def audit(pkg: SignedPackage) -> Verdict:
            try:
                got = GatherState.parse(initiator, holders, cfg.m, cfg.n, pkg.message)
            except ValueError as exc:
                return Verdict(False, str(exc))
            for k, holder in enumerate(holders):
                rec = self.ledger.get((self.round, 1, 0, holder, 0))
                if rec is None or rec.package.signature != got.general_sigs[k]:
                    return Verdict(False, f"general signature of {party_name(holder)} differs from ledger")
            for t, sig in enumerate(got.hop_sigs, start=1):
                rec = self.ledger.get((self.round, 2, holders[t - 1], initiator, t))
                if rec is None or rec.package.signature != sig:
                    return Verdict(False, f"hop signature {t} differs from ledger")
            for k, holder in enumerate(holders):
                rec = self.ledger.get((self.round, 1, 0, holder, 0))
                probe = SignedPackage(rec.package.session_id, got.messages[k], rec.package.signature,
                                      rec.package.encrypted_poly, cfg.n)
                if not check_with_signer_keys(probe, rec.keys.signer):
                    return Verdict(False, f"order of {party_name(holder)} does not match its signature")
            return Verdict(True)

        return audit

    def gather(self, i: int) -> GatherState:
        cfg = self.cfg
        ring = self.ring(i)
        state = GatherState(i, cfg.n)
        for s in range(1, cfg.N):
            j, nxt = ring[s - 1], ring[s % (cfg.N - 1)]
            base = state.with_order(j, self.orders[j])
            audit = self._audit(i, base.holders)
            for attempt in range(self.budget + 1):
                out, tampered = base, False
                if self.dishonest(j):
                    out, tampered = self.adv.on_sign_gather(j, base, self.net.view(j), (self.round, 2, i, s))
                pkg = self._qds(2, i, s, j, nxt, out.signing_input(), tampered, audit, attempt)
                if pkg is not None:
                    state = GatherState.parse(i, base.holders, cfg.m, cfg.n, pkg.message).with_hop_sig(
                        pkg.signature)
                    break
            else:
                raise RoundAborted(f"gathering of {party_name(i)} stuck at hop {s}", (2, i, s))
        return state


def run_round(config: RoleConfig, adversary=None, *, m0: Bits | None = None, seed=0,
              net: Network | None = None, round_id: int = 0,
              retry_budget: int = DEFAULT_RETRY_BUDGET,
              output_fn: Callable = majority_output) -> RoundResult:
    """Execute all three phases and report per-lieutenant outputs."""
    if adversary is None:
        adversary = Adversary(seed=seed)
    extra = adversary.parties - config.dishonest_parties
    if extra:
        raise ValueError(f"strategies bound to honest parties {sorted(extra)}")
    if net is None:
        net = Network(config.N, config.dishonest_parties, seed=seed)
    elif net.dishonest != config.dishonest_parties:
        raise ValueError("network and config disagree on who is dishonest")
    if m0 is None:
        m0 = Bits(random.Random(f"{seed}:order").getrandbits(config.m), config.m)
    if m0.length != config.m:
        raise ValueError("order length differs from m")
    rnd = _Round(config, adversary, net, round_id, retry_budget, output_fn)
    result = RoundResult(config, m0, {}, {}, rnd.attempts, rnd.ledger)
    try:
        rnd.distribute(m0)
        for i in config.lieutenants:
            final = rnd.gather(i)
            result.gathered[i] = final
            result.outputs[i] = output_fn(final.final_orders())
    except RoundAborted as exc:
        result.aborted, result.abort_reason = True, str(exc)
    except KeyExhaustedError as exc:
        result.aborted, result.abort_reason = True, f"key exhaustion: {exc}"
    return result


def consensus_output(final: GatherState, output_fn: Callable = majority_output) -> Bits:
    return output_fn(final.final_orders())
