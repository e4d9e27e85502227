"""Key rates feeding the signature and consensus rates.

BB84: two-decoy finite-key analysis with Hoeffding fluctuation terms.  The
channel is summarised by its mean transmittance and detector parameters;
observed counts are replaced by their expectation values, which keeps
every curve deterministic.

DM-CV: only the closed-form error-model quantities (outcome probability
tables, p_pass, delta_EC).  The secret-key rate itself needs a convex
optimisation over states and is deliberately not provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .qds import signature_rate


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def shannon_entropy(probs) -> float:
    return float(-sum(p * math.log2(p) for p in probs if p > 0))


# -- BB84 ------------------------------------------------------------------

@dataclass(frozen=True)
class DecoyParams:
    mu: tuple = (0.5, 0.1, 0.0002)
    p: tuple = (0.7, 0.2, 0.1)
    q_x: float = 0.9
    n_pulses: float = 1e10
    eps_sec: float = 1e-10
    eps_cor: float = 1e-15
    eps_pa: float = 1e-10
    f_ec: float = 1.1
    detector_efficiency: float = 0.70
    dark_count: float = 1e-8
    misalignment: float = 0.02
    rep_rate: float = 1e9

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        m1, m2, m3 = self.mu
        if not (m1 > m2 + m3 and m2 > m3 >= 0):
            raise ValueError("need mu1 > mu2 + mu3 and mu2 > mu3 >= 0")
        if len(self.p) != 3 or min(self.p) <= 0 or abs(sum(self.p) - 1) > 1e-12:
            raise ValueError("intensity probabilities must be positive and sum to 1")
        if not 0 < self.q_x < 1:
            raise ValueError("q_x must lie in (0, 1)")
        if self.n_pulses <= 0 or self.rep_rate <= 0:
            raise ValueError("block size and repetition rate must be positive")
        for eps in (self.eps_sec, self.eps_cor, self.eps_pa):
            if not 0 < eps < 1:
                raise ValueError("security parameters must lie in (0, 1)")

    def tau(self, k: int) -> float:
        """Probability that a pulse carries k photons."""
        return sum(math.exp(-u) * u ** k * pk / math.factorial(k) for u, pk in zip(self.mu, self.p))


@dataclass(frozen=True)
class ObservedStats:
    n_X: tuple   # detections per intensity, X basis
    n_Z: tuple
    m_X: tuple   # errors per intensity
    m_Z: tuple

    def __post_init__(self):
        for counts, errs in ((self.n_X, self.m_X), (self.n_Z, self.m_Z)):
            for c, e in zip(counts, errs):
                if c < 0 or e < 0 or e > c * (1 + 1e-12):
                    raise ValueError("counts must be nonnegative with errors <= detections")

    @property
    def total_X(self) -> float:
        return float(sum(self.n_X))

    @property
    def total_Z(self) -> float:
        return float(sum(self.n_Z))

    @property
    def errors_X(self) -> float:
        return float(sum(self.m_X))

    @property
    def errors_Z(self) -> float:
        return float(sum(self.m_Z))


def detection_model(eta_total: float, mu: float, decoy: DecoyParams) -> tuple[float, float]:
    """(gain, error probability) per pulse of intensity mu."""
    att = math.exp(-eta_total * mu)
    gain = 1 - (1 - 2 * decoy.dark_count) * att
    err = decoy.dark_count + decoy.misalignment * (1 - att)
    return gain, err


def expected_stats(eta_mean: float, decoy: DecoyParams, n_pulses: float | None = None) -> ObservedStats:
    if not 0 <= eta_mean <= 1:
        raise ValueError("transmittance must lie in [0, 1]")
    N = decoy.n_pulses if n_pulses is None else n_pulses
    eta_t = eta_mean * decoy.detector_efficiency
    sx, sz = decoy.q_x ** 2, (1 - decoy.q_x) ** 2
    nX, nZ, mX, mZ = [], [], [], []
    for u, pk in zip(decoy.mu, decoy.p):
        gain, err = detection_model(eta_t, u, decoy)
        nX.append(N * pk * sx * gain)
        nZ.append(N * pk * sz * gain)
        mX.append(N * pk * sx * err)
        mZ.append(N * pk * sz * err)
    return ObservedStats(tuple(nX), tuple(nZ), tuple(mX), tuple(mZ))


def _hoeffding(total: float, eps: float) -> float:
    return math.sqrt(total / 2 * math.log(21 / eps))


def _bounded(counts, total, decoy: DecoyParams, fluctuation: bool = True):
    """(lower, upper) decoy-corrected counts n^-_k, n^+_k."""
    d = _hoeffding(total, decoy.eps_sec) if fluctuation else 0.0
    lo = tuple(math.exp(u) / pk * (c - d) for u, pk, c in zip(decoy.mu, decoy.p, counts))
    hi = tuple(math.exp(u) / pk * (c + d) for u, pk, c in zip(decoy.mu, decoy.p, counts))
    return lo, hi


def vacuum_events(stats: ObservedStats, decoy: DecoyParams, basis: str = "X",
                  fluctuation: bool = True) -> float:
    counts, total = (stats.n_X, stats.total_X) if basis == "X" else (stats.n_Z, stats.total_Z)
    lo, hi = _bounded(counts, total, decoy, fluctuation)
    _, m2, m3 = decoy.mu
    val = decoy.tau(0) * (m2 * lo[2] - m3 * hi[1]) / (m2 - m3)
    return max(val, 0.0)


def single_photon_events(stats: ObservedStats, decoy: DecoyParams, s0: float, basis: str = "X",
                         fluctuation: bool = True) -> float:
    counts, total = (stats.n_X, stats.total_X) if basis == "X" else (stats.n_Z, stats.total_Z)
    lo, hi = _bounded(counts, total, decoy, fluctuation)
    m1, m2, m3 = decoy.mu
    t0, t1 = decoy.tau(0), decoy.tau(1)
    inner = lo[1] - hi[2] - (m2 ** 2 - m3 ** 2) / m1 ** 2 * (hi[0] - s0 / t0)
    val = t1 * m1 * inner / (m1 * (m2 - m3) - m2 ** 2 + m3 ** 2)
    return max(val, 0.0)


def single_photon_errors(stats: ObservedStats, decoy: DecoyParams, fluctuation: bool = True) -> float:
    """Upper bound v_Z1 on bit errors among single-photon Z events."""
    lo, hi = _bounded(stats.m_Z, stats.errors_Z, decoy, fluctuation)
    _, m2, m3 = decoy.mu
    return max(decoy.tau(1) * (hi[1] - lo[2]) / (m2 - m3), 0.0)


def gamma_u(c: float, d: float, b: float, a: float) -> float:
    """Finite-sampling correction for the phase error rate (random sampling
    without replacement): c = s_Z1, d = s_X1, b = observed rate, a = eps."""
    if b <= 0 or b >= 1 or c <= 0 or d <= 0:
        return 0.0
    arg = (c + d) / (c * d * (1 - b) * b) * 21 ** 2 / a ** 2
    inner = (c + d) * (1 - b) * b / (c * d * math.log(2)) * math.log2(arg)
    return math.sqrt(max(inner, 0.0))


def phase_error_rate(stats: ObservedStats, decoy: DecoyParams, s_z1: float, s_x1: float,
                     with_gamma: bool = True, fluctuation: bool = True) -> float:
    if s_z1 <= 0:
        return 0.5
    v = single_photon_errors(stats, decoy, fluctuation)
    ratio = v / s_z1
    phi = ratio + (gamma_u(s_z1, s_x1, ratio, decoy.eps_sec) if with_gamma else 0.0)
    return min(max(phi, 0.0), 0.5)


@dataclass(frozen=True)
class KeyLength:
    l_key: float
    raw: float
    aborted: bool
    s_x0: float
    s_x1: float
    s_z1: float
    phi: float
    qber: float
    lambda_ec: float


def key_length(stats: ObservedStats, decoy: DecoyParams) -> KeyLength:
    s_x0 = vacuum_events(stats, decoy, "X")
    s_x1 = single_photon_events(stats, decoy, s_x0, "X")
    s_z0 = vacuum_events(stats, decoy, "Z")
    s_z1 = single_photon_events(stats, decoy, s_z0, "Z")
    phi = phase_error_rate(stats, decoy, s_z1, s_x1)
    nX = stats.total_X
    e_x = stats.errors_X / nX if nX > 0 else 0.5
    lam = decoy.f_ec * nX * binary_entropy(e_x)
    raw = (s_x0 + s_x1 * (1 - binary_entropy(phi)) - lam
           - math.log2(2 / decoy.eps_cor) - 6 * math.log2(22 / decoy.eps_pa))
    return KeyLength(max(raw, 0.0), raw, raw <= 0, s_x0, s_x1, s_z1, phi, e_x, lam)


def bb84_key_rate(eta_mean: float, decoy: DecoyParams = DecoyParams()) -> tuple[float, KeyLength]:
    """Secret bits per second on one link."""
    kl = key_length(expected_stats(eta_mean, decoy), decoy)
    return kl.l_key * decoy.rep_rate / decoy.n_pulses, kl


def consensus_rate(key_rates, N: int, n: int) -> float:
    """min over links of KR/(3n), divided by the N^2 - N signatures per consensus."""
    rates = list(key_rates)
    if not rates:
        raise ValueError("need at least one link")
    if N < 2:
        raise ValueError("need at least two players")
    return min(signature_rate(kr, n) for kr in rates) / (N * N - N)


# -- DM-CV error model -------------------------------------------------------------

@dataclass(frozen=True)
class CvModelParams:
    alpha: float = 0.72
    delta_c: float = 0.42
    delta_a: float = 0.52
    delta_p: float = 0.0
    eta: float = 1.0
    xi: float = 0.02
    beta: float = 0.95
    rep_rate: float = 1e9

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if min(self.delta_c, self.delta_a, self.delta_p) < 0:
            raise ValueError("post-selection thresholds must be nonnegative")
        if self.delta_p >= math.pi / 4:
            raise ValueError("phase cut leaves an empty sector")
        if not 0 < self.eta <= 1 or self.xi < 0 or not 0 <= self.beta <= 1:
            raise ValueError("invalid channel or reconciliation parameter")


def cv_amplitude(cv: CvModelParams, x: int) -> complex:
    """QPSK constellation point alpha_x, one per quadrant."""
    return cv.alpha * complex(math.cos((2 * x + 1) * math.pi / 4), math.sin((2 * x + 1) * math.pi / 4))


def _heterodyne_sector(mu: complex, s: float, r_min: float, th0: float, th1: float) -> float:
    # radial integral in closed form, angle by adaptive quadrature
    sq = math.sqrt(s)
    norm2 = abs(mu) ** 2

    def f(theta):
        c = mu.real * math.cos(theta) + mu.imag * math.sin(theta)
        radial = (s / 2 * math.exp(-(r_min - c) ** 2 / s)
                  + c * math.sqrt(math.pi * s) / 2 * special.erfc((r_min - c) / sq))
        return math.exp(-(norm2 - c * c) / s) * radial

    val, _ = integrate.quad(f, th0, th1, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val / (math.pi * s)


def cv_outcome_probabilities(mode: str, cv: CvModelParams, x: int) -> dict:
    """Outcome probabilities for input x.

    heterodyne: {0,1,2,3,'discard'}; homodyne: {'q': {0,1,'discard'}, 'p': {...}}.
    """
    if x not in range(4):
        raise ValueError("x must be 0..3")
    a = cv_amplitude(cv, x)
    if mode == "heterodyne":
        mu = math.sqrt(cv.eta) * a
        s = 1 + cv.eta * cv.xi / 2
        out = {}
        for j in range(4):
            out[j] = _heterodyne_sector(mu, s, cv.delta_a, j * math.pi / 2 + cv.delta_p,
                                        (j + 1) * math.pi / 2 - cv.delta_p)
        out["discard"] = max(0.0, 1.0 - sum(out[j] for j in range(4)))
        return out
    if mode == "homodyne":
        var = cv.eta * cv.xi + 1      # density exp(-(y-m)^2/var)/sqrt(pi var)
        sd = math.sqrt(var)
        out = {}
        for quad, mean in (("q", math.sqrt(2 * cv.eta) * a.real), ("p", math.sqrt(2 * cv.eta) * a.imag)):
            p0 = 0.5 * special.erfc((cv.delta_c - mean) / sd)
            p1 = 0.5 * special.erfc((cv.delta_c + mean) / sd)
            out[quad] = {0: float(p0), 1: float(p1), "discard": float(max(0.0, 1 - p0 - p1))}
        return out
    raise ValueError(f"unknown detection mode {mode!r}")


@dataclass(frozen=True)
class CvErrorTerms:
    p_pass: float
    delta_ec: float
    h_z: float
    h_z_given_x: float


def _ec_terms(tables, outcomes, beta, px=0.25) -> CvErrorTerms:
    p_pass = sum(px * sum(t[o] for o in outcomes) for t in tables)
    if p_pass <= 0:
        return CvErrorTerms(0.0, 0.0, 0.0, 0.0)
    marg = [sum(px * t[o] for t in tables) / p_pass for o in outcomes]
    h_z = shannon_entropy(marg)
    h_zx = 0.0
    for t in tables:
        kept = sum(t[o] for o in outcomes)
        if kept > 0:
            h_zx += px * shannon_entropy([t[o] / kept for o in outcomes])
    return CvErrorTerms(p_pass, (1 - beta) * h_z + beta * h_zx, h_z, h_zx)


def cv_error_correction_terms(mode: str, cv: CvModelParams, tables=None):
    """(p_pass, delta_EC) bundle.  Homodyne returns one bundle per quadrature."""
    if tables is None:
        tables = [cv_outcome_probabilities(mode, cv, x) for x in range(4)]
    if mode == "heterodyne":
        return _ec_terms(tables, (0, 1, 2, 3), cv.beta)
    if mode == "homodyne":
        return {q: _ec_terms([t[q] for t in tables], (0, 1), cv.beta) for q in ("q", "p")}
    raise ValueError(f"unknown detection mode {mode!r}")
