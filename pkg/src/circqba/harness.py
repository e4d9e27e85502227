"""Scenario runner and replayable transcripts.

A scenario fixes the roles, the adversary's strategies, the key supply and
the seed.  ``run`` drives one or more consensus rounds over a single
simulated network and collects every event, QDS verdict and key
allocation.  Transcripts are pure functions of the scenario, so the
sha256 of the exported files doubles as a regression fingerprint.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import jsonschema

from .adversary import KINDS, Adversary, Strategy
from .bits import Bits
from .consensus import DEFAULT_RETRY_BUDGET, RoleConfig, RoundResult, run_round
from .network import CA, Event, Network, Topology, party_name  # noqa: F401  (re-exported)

_STRATEGY_SCHEMA = {
    "type": "object",
    "properties": {
        "party": {"type": "integer", "minimum": 0},
        "kind": {"enum": list(KINDS)},
        "persistence": {"type": "integer", "minimum": 0},
        "target": {"type": ["integer", "null"], "minimum": 1},
    },
    "required": ["party", "kind"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "players": {"type": "integer", "minimum": 3},
        "malicious": {"type": "array", "items": {"type": "integer", "minimum": 1}, "uniqueItems": True},
        "faults": {"type": "integer", "minimum": 0},
        "general_honest": {"type": "boolean"},
        "message_bits": {"type": "integer", "minimum": 1},
        "signature_bits": {"type": "integer", "minimum": 2},
        "adversary": {"type": "array", "items": _STRATEGY_SCHEMA},
        "seed": {"type": ["integer", "string"]},
        "order": {"type": "string", "pattern": "^[01]+$"},
        "rounds": {"type": "integer", "minimum": 1},
        "key_capacity_bits": {"type": ["integer", "null"], "minimum": 0},
        "retry_budget": {"type": "integer", "minimum": 0},
        "channel": {"type": "object"},
        "decoy": {"type": "object"},
    },
    "required": ["players", "message_bits", "signature_bits"],
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """The scenario document is malformed or inconsistent."""


@dataclass
class Scenario:
    players: int
    message_bits: int
    signature_bits: int
    malicious: list = field(default_factory=list)   # dishonest lieutenant indices
    faults: int | None = None                        # f; defaults to the number of dishonest parties
    general_honest: bool = True
    adversary: list = field(default_factory=list)
    seed: int | str = 0
    order: str | None = None
    rounds: int = 1
    key_capacity_bits: int | None = None             # per star link
    retry_budget: int = DEFAULT_RETRY_BUDGET
    channel: dict = field(default_factory=dict)
    decoy: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> Scenario:
        if isinstance(doc, dict) and any(isinstance(a, dict) and a.get("party") == CA
                                         for a in doc.get("adversary") or ()):
            raise ScenarioError("adversary: a dishonest CA is not modelled (the CA is trusted)")
        try:
            jsonschema.validate(doc, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ScenarioError(f"{where}: {exc.message}") from None
        sc = cls(**doc)
        sc.role_config()      # surfaces role inconsistencies early
        sc.strategies()
        return sc

    @classmethod
    def load(cls, path) -> Scenario:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def role_config(self) -> RoleConfig:
        n_bad = len(self.malicious) + (0 if self.general_honest else 1)
        f = n_bad if self.faults is None else self.faults
        try:
            return RoleConfig(self.players, f, self.general_honest, frozenset(self.malicious),
                              self.message_bits, self.signature_bits)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    def strategies(self) -> list[Strategy]:
        cfg = self.role_config()
        out = []
        for spec in self.adversary:
            try:
                s = Strategy(spec["kind"], spec["party"], spec.get("persistence", 1), spec.get("target"))
            except ValueError as exc:
                raise ScenarioError(str(exc)) from None
            if s.party not in cfg.dishonest_parties:
                raise ScenarioError(f"strategy for honest party {party_name(s.party)}")
            out.append(s)
        return out

    def m0(self) -> Bits | None:
        if self.order is None:
            return None
        if len(self.order) != self.message_bits:
            raise ScenarioError("order length differs from message_bits")
        return Bits(int(self.order, 2), len(self.order))


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@dataclass
class Transcript:
    scenario: Scenario
    network: Network
    rounds: list[RoundResult]

    @property
    def ic1(self) -> bool | None:
        return _all_of(r.ic1 for r in self.rounds)

    @property
    def ic2(self) -> bool | None:
        return _all_of(r.ic2 for r in self.rounds)

    @property
    def aborted(self) -> bool:
        return any(r.aborted for r in self.rounds)

    @property
    def forgeries(self) -> int:
        return sum(r.forgeries for r in self.rounds)

    def ok(self) -> bool:
        """IC1 and IC2 hold wherever they are defined, and no round aborted."""
        return not self.aborted and self.ic1 is not False and self.ic2 is not False

    # -- exports ---------------------------------------------------------------
    def events_csv(self) -> str:
        rows = ((e.tick, e.seq, party_name(e.source), party_name(e.destination), e.channel, e.kind,
                 int(e.tampered), len(e.payload), e.payload.hex()) for e in self.network.events)
        return _rows_to_csv(["tick", "seq", "source", "destination", "channel", "kind", "tampered",
                             "payload_len", "payload_hex"], rows)

    def qds_csv(self) -> str:
        rows = []
        for r in self.rounds:
            for a in r.attempts:
                rows.append((a.round, a.phase, party_name(a.initiator) if a.phase == 2 else "",
                             a.hop, party_name(a.signer), party_name(a.forwarder), a.attempt,
                             a.session_id, int(a.forwarder_verdict), int(a.ca_verdict),
                             int(a.accepted), int(a.tampered), a.msg_bits, a.reason))
        return _rows_to_csv(["round", "phase", "initiator", "hop", "signer", "forwarder", "attempt",
                             "session_id", "forwarder_ok", "ca_ok", "accepted", "tampered",
                             "msg_bits", "reason"], rows)

    def keys_csv(self) -> str:
        rows = ((a.pool, a.offset, a.length, a.purpose) for a in self.network.allocations())
        return _rows_to_csv(["pool", "offset", "length", "purpose"], rows)

    def summary(self) -> dict:
        rounds = []
        for r in self.rounds:
            rounds.append({
                "m0": r.m0.to_str(),
                "outputs": {party_name(i): b.to_str() for i, b in sorted(r.outputs.items())},
                "ic1": r.ic1,
                "ic2": r.ic2,
                "qds_invocations": r.qds_invocations,
                "restarts": r.restarts,
                "forgeries": r.forgeries,
                "aborted": r.aborted,
                "abort_reason": r.abort_reason,
                "ledger_entries": len(r.ledger),
            })
        return {
            "scenario": self.scenario.to_dict(),
            "players": self.scenario.players,
            "dishonest": [party_name(p) for p in sorted(self.network.dishonest)],
            "rounds": rounds,
            "ic1": self.ic1,
            "ic2": self.ic2,
            "qds_invocations": sum(r.qds_invocations for r in self.rounds),
            "restarts": sum(r.restarts for r in self.rounds),
            "forgeries": self.forgeries,
            "aborted": self.aborted,
            "quantum_links_used": [party_name(p) for p in self.network.links_used()],
            "events": len(self.network.events),
        }

    def files(self) -> dict[str, str]:
        return {
            "events.csv": self.events_csv(),
            "qds.csv": self.qds_csv(),
            "keys.csv": self.keys_csv(),
            "summary.json": json.dumps(self.summary(), indent=2, sort_keys=True) + "\n",
        }

    def sha256(self) -> str:
        h = hashlib.sha256()
        for name, body in sorted(self.files().items()):
            h.update(name.encode() + b"\0" + body.encode() + b"\0")
        return h.hexdigest()

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, body in self.files().items():
            p = out / name
            p.write_text(body)
            paths.append(p)
        return paths


def _all_of(values) -> bool | None:
    vals = [v for v in values if v is not None]
    return all(vals) if vals else None


def run(scenario: Scenario | dict) -> Transcript:
    """Execute every round of ``scenario`` on one network."""
    if isinstance(scenario, dict):
        scenario = Scenario.from_dict(scenario)
    cfg = scenario.role_config()
    adversary = Adversary(scenario.strategies(), seed=scenario.seed)
    net = Network(cfg.N, cfg.dishonest_parties, seed=scenario.seed,
                  link_capacity=scenario.key_capacity_bits)
    m0 = scenario.m0()
    results = []
    for k in range(scenario.rounds):
        res = run_round(cfg, adversary, m0=m0, seed=f"{scenario.seed}:{k}", net=net, round_id=k,
                        retry_budget=scenario.retry_budget)
        results.append(res)
        if res.aborted:
            break
    return Transcript(scenario, net, results)
