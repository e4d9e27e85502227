"""Closed-form security and complexity bounds for circular QBA.

Probabilities come in two flavours: floats for presentation and plotting,
and exact ``Fraction`` values (suffix ``_exact``) for brute-force checks
and the signature-length planner, where float rounding at the boundary
would break the minimality contract.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .lfsr_toeplitz import forgery_bound

PROTOCOLS = ("circular", "qkd_based", "recursive")


@dataclass(frozen=True)
class BoundInputs:
    N: int
    f: int
    m: int
    n: int
    eps_kgp: float = 0.0

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("need at least 3 players")
        if not 0 <= self.f <= self.N - 2:
            raise ValueError("f must lie in [0, N-2]")
        if self.m < 1:
            raise ValueError("order length must be positive")
        if self.n < 2:
            raise ValueError("signature length must be at least 2")
        if not 0.0 <= self.eps_kgp <= 1.0:
            raise ValueError("eps_kgp must be a probability")


def forgery_exact(msg_len: int, n: int) -> Fraction:
    return min(Fraction(msg_len, 2 ** (n - 1)), Fraction(1))


def hop_length(j: int, m: int, n: int) -> int:
    """Bits signed at the j-th hop of a gathering: j orders, j general sigs, j-1 hop sigs."""
    if j < 1:
        raise ValueError("hop index starts at 1")
    return j * m + (2 * j - 1) * n


def longest_message(N: int, m: int, n: int) -> int:
    """(N-1)m + (2N-3)n.  N = 2 degenerates to a single hop of m + n bits."""
    if N < 2:
        raise ValueError("need at least 2 players")
    return hop_length(N - 1, m, n)


def _case1(inp: BoundInputs, eps) -> object:
    N, f = inp.N, inp.f
    L = longest_message(N, inp.m, inp.n)
    return f * eps(inp.m, inp.n) + f * (N - f - 1) * eps(L, inp.n)


def _case2(inp: BoundInputs, eps) -> object:
    N, f = inp.N, inp.f
    if f <= 1:
        return 0 * eps(1, inp.n)
    return (f - 1) * (N - f) * eps(longest_message(N, inp.m, inp.n), inp.n)


def case1_failure(inp: BoundInputs) -> float:
    """Honest general, f dishonest lieutenants: distribution plus gathering terms."""
    return min(_case1(inp, forgery_bound), 1.0)


def case2_failure(inp: BoundInputs) -> float:
    """Dishonest general and f-1 dishonest lieutenants."""
    return min(_case2(inp, forgery_bound), 1.0)


def qba_failure(inp: BoundInputs) -> float:
    return max(case1_failure(inp), case2_failure(inp))


def case1_failure_exact(inp: BoundInputs) -> Fraction:
    return min(_case1(inp, forgery_exact), Fraction(1))


def case2_failure_exact(inp: BoundInputs) -> Fraction:
    return min(Fraction(_case2(inp, forgery_exact)), Fraction(1))


def qba_failure_exact(inp: BoundInputs) -> Fraction:
    return max(case1_failure_exact(inp), case2_failure_exact(inp))


def total_failure(inp: BoundInputs) -> float:
    """QBA failure composed with the key generation failure."""
    return min(qba_failure(inp) + inp.eps_kgp, 1.0)


def log2_qba_failure(inp: BoundInputs) -> float:
    """log2 of the (unclamped) QBA bound; finite even when 2^-n underflows."""
    N, f, m, n = inp.N, inp.f, inp.m, inp.n
    L = longest_message(N, m, n)
    c1 = f * m + f * (N - f - 1) * L
    c2 = (f - 1) * (N - f) * L if f > 1 else 0
    top = max(c1, c2)
    if top == 0:
        return -math.inf
    return math.log2(top) + 1 - n


def fault_tolerance_ok(N: int, f: int) -> bool:
    """At least two honest participants are needed."""
    return N >= f + 2


def complexity(protocol: str, N: int, f: int) -> int:
    """QDS (or QKD-signed message) count, exact integer."""
    if protocol == "circular":
        return N * N - N
    if protocol == "qkd_based":
        return sum(math.perm(N - 1, r) for r in range(1, f + 2))
    if protocol == "recursive":
        return sum(math.perm(N - 1, r + 2) for r in range(f))
    raise ValueError(f"unknown protocol {protocol!r}")


def minimal_players(protocol: str, f: int) -> int:
    """Smallest N each protocol tolerates f faults with."""
    if protocol == "circular":
        return max(f + 2, 3)
    if protocol == "qkd_based":
        return 3 * f + 1
    if protocol == "recursive":
        return 2 * f + 1
    raise ValueError(f"unknown protocol {protocol!r}")


def quantum_channels(protocol: str, N: int) -> int:
    """Quantum links needed: a star through the CA versus a complete graph."""
    if protocol == "circular":
        return N
    if protocol in ("qkd_based", "recursive"):
        return N * (N - 1) // 2
    raise ValueError(f"unknown protocol {protocol!r}")


def signature_length_planner(N: int, f: int, m: int, target_eps: float,
                             max_n: int = 4096) -> int:
    """Smallest n with qba_failure(N, f, m, n) <= target_eps."""
    if not 0.0 < target_eps < 1.0:
        raise ValueError("target must lie in (0, 1)")
    target = Fraction(target_eps)
    for n in range(2, max_n + 1):
        if qba_failure_exact(BoundInputs(N, f, m, n)) <= target:
            return n
    raise ValueError(f"no n <= {max_n} reaches the target")


# -- circular-gathering worst case ------------------------------------------

def gathering_position(initiator: int, j: int, N: int) -> int:
    """1-based position of lieutenant j in the gathering started by initiator."""
    return (j - initiator) % (N - 1) + 1


def gathering_failure_exact(N: int, dishonest, m: int, n: int) -> Fraction:
    """Exact probability that some gathering started by an honest lieutenant
    is forged, when every dishonest signer forges with probability
    eps_for(L_pos, n) independently."""
    dishonest = set(dishonest)
    honest = [i for i in range(1, N) if i not in dishonest]
    ok = Fraction(1)
    for i in honest:
        for j in dishonest:
            ok *= 1 - forgery_exact(hop_length(gathering_position(i, j, N), m, n), n)
    return 1 - ok


def gathering_failure_sup(N: int, n_dishonest: int, m: int, n: int) -> Fraction:
    """N_d (N - N_d - 1) eps_for(L_{N-1}, n)."""
    return n_dishonest * (N - n_dishonest - 1) * forgery_exact(longest_message(N, m, n), n)


def worst_case_check(N: int, m: int, n: int):
    """Yield (tau_d, exact failure, bound) for every dishonest subset."""
    lieutenants = range(1, N)
    for k in range(N):
        for tau in itertools.combinations(lieutenants, k):
            yield tau, gathering_failure_exact(N, tau, m, n), gathering_failure_sup(N, k, m, n)
