"""Circular quantum Byzantine agreement: signatures, consensus, bounds and rates."""

__version__ = "0.1.0"

from .bits import Bits
from .consensus import RoleConfig, RoundResult, run_round
from .harness import Scenario, Transcript, run
from .qds import KeyPool, KeyTriple, SignedPackage, sign, verify_as_ca, verify_as_forwarder

__all__ = [
    "Bits",
    "KeyPool",
    "KeyTriple",
    "RoleConfig",
    "RoundResult",
    "Scenario",
    "SignedPackage",
    "Transcript",
    "run",
    "run_round",
    "sign",
    "verify_as_ca",
    "verify_as_forwarder",
]
