import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from circqba.keyrate import (
    CvModelParams,
    DecoyParams,
    ObservedStats,
    bb84_key_rate,
    binary_entropy,
    consensus_rate,
    cv_amplitude,
    cv_error_correction_terms,
    cv_outcome_probabilities,
    detection_model,
    expected_stats,
    gamma_u,
    key_length,
    phase_error_rate,
    shannon_entropy,
    single_photon_errors,
    single_photon_events,
    vacuum_events,
)

GOLDEN = Path(__file__).parent / "fixtures" / "cv_golden.json"
D = DecoyParams()


def test_entropies():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0) == binary_entropy(1) == 0.0
    assert binary_entropy(0.11) == pytest.approx(binary_entropy(0.89))
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)
    assert shannon_entropy([0.25] * 4) == 2.0


def test_decoy_validation():
    with pytest.raises(ValueError):
        DecoyParams(mu=(0.14, 0.1, 0.05))       # mu1 <= mu2 + mu3
    with pytest.raises(ValueError):
        DecoyParams(p=(0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        DecoyParams(q_x=1.0)


def test_tau_is_photon_number_mixture():
    for k in range(4):
        direct = sum(p * math.exp(-u) * u ** k / math.factorial(k) for u, p in zip(D.mu, D.p))
        assert D.tau(k) == pytest.approx(direct, rel=1e-14)


def test_detection_model_matches_photon_number_sum():
    # gain and error as sums over photon number with Y_k = 1 - (1 - 2 p_dc)(1 - eta)^k
    eta, mu = 0.07, 0.5
    ks = range(60)
    pois = [math.exp(-mu) * mu ** k / math.factorial(k) for k in ks]
    yk = [1 - (1 - 2 * D.dark_count) * (1 - eta) ** k for k in ks]
    ek_yk = [D.dark_count + D.misalignment * (1 - (1 - eta) ** k) for k in ks]
    gain, err = detection_model(eta, mu, D)
    assert gain == pytest.approx(sum(p * y for p, y in zip(pois, yk)), rel=1e-12)
    assert err == pytest.approx(sum(p * e for p, e in zip(pois, ek_yk)), rel=1e-12)


def _truth(eta_mean, d=D):
    """Exact expected vacuum / single-photon counts and single-photon Z errors."""
    et = eta_mean * d.detector_efficiency
    t0 = sum(p * math.exp(-u) for u, p in zip(d.mu, d.p))
    t1 = sum(p * u * math.exp(-u) for u, p in zip(d.mu, d.p))
    y1 = 1 - (1 - 2 * d.dark_count) * (1 - et)
    N = d.n_pulses
    return (N * d.q_x ** 2 * t0 * 2 * d.dark_count,
            N * d.q_x ** 2 * t1 * y1,
            N * (1 - d.q_x) ** 2 * t1 * (d.dark_count + d.misalignment * et))


@pytest.mark.parametrize("eta", [1e-3, 0.03, 0.2, 0.6])
def test_decoy_bounds_bracket_truth(eta):
    st_ = expected_stats(eta, D)
    s0_true, s1_true, v_true = _truth(eta)
    for fl in (False, True):
        s0 = vacuum_events(st_, D, "X", fl)
        s1 = single_photon_events(st_, D, s0, "X", fl)
        assert s0 <= s0_true * (1 + 1e-9)
        assert s1 <= s1_true * (1 + 1e-9)
        assert single_photon_errors(st_, D, fl) >= v_true * (1 - 1e-9)
    # without fluctuations the single-photon bound is nearly tight
    s1 = single_photon_events(st_, D, vacuum_events(st_, D, "X", False), "X", False)
    assert s1 / s1_true > 0.95


@given(st.floats(1e-4, 1.0))
@settings(max_examples=40, deadline=None, derandomize=True)
def test_bounds_never_exceed_observed(eta):
    st_ = expected_stats(eta, D)
    s0 = vacuum_events(st_, D)
    s1 = single_photon_events(st_, D, s0)
    assert 0 <= s0 + s1 <= st_.total_X


def test_gamma_u_properties():
    assert gamma_u(1e6, 1e7, 0.0, 1e-10) == 0.0
    g = [gamma_u(c, 10 * c, 0.03, 1e-10) for c in (1e4, 1e5, 1e6, 1e7)]
    assert all(a > b > 0 for a, b in zip(g, g[1:]))
    # shrinks like 1/sqrt(sample size)
    assert g[0] / g[2] == pytest.approx(10, rel=0.15)
    assert gamma_u(1e5, 1e6, 0.03, 1e-5) < gamma_u(1e5, 1e6, 0.03, 1e-12)


def test_phase_error_clamped():
    st_ = expected_stats(1e-6, D)
    assert phase_error_rate(st_, D, 0.0, 0.0) == 0.5
    assert 0 <= phase_error_rate(st_, D, 1.0, 1.0) <= 0.5


def test_key_length_zero_without_signal():
    kl = key_length(expected_stats(0.0, D), D)
    assert kl.aborted and kl.l_key == 0.0


def test_key_length_formula_assembled():
    kl = key_length(expected_stats(0.1, D), D)
    direct = (kl.s_x0 + kl.s_x1 * (1 - binary_entropy(kl.phi)) - 1.1 * expected_stats(0.1, D).total_X
              * binary_entropy(kl.qber) - math.log2(2 / D.eps_cor) - 6 * math.log2(22 / D.eps_pa))
    assert kl.raw == pytest.approx(direct, rel=1e-12)
    assert kl.qber == pytest.approx(expected_stats(0.1, D).errors_X / expected_stats(0.1, D).total_X)


@pytest.mark.parametrize("field,values", [
    ("dark_count", [1e-9, 1e-8, 1e-7, 1e-6, 1e-5]),
    ("misalignment", [0.0, 0.01, 0.02, 0.04, 0.08]),
])
def test_key_length_nonincreasing(field, values):
    for eta in (0.01, 0.1):
        ls = [key_length(expected_stats(eta, replace(D, **{field: v})), replace(D, **{field: v})).l_key
              for v in values]
        assert all(a >= b for a, b in zip(ls, ls[1:]))


def test_key_rate_increases_with_transmittance():
    rates = [bb84_key_rate(e)[0] for e in (0.01, 0.05, 0.1, 0.3)]
    assert all(a < b for a, b in zip(rates, rates[1:]))


def test_finite_size_penalty():
    small = bb84_key_rate(0.05, replace(D, n_pulses=1e9))[0]
    big = bb84_key_rate(0.05, replace(D, n_pulses=1e12))[0]
    assert small < big


def test_consensus_rate_identity_and_min():
    kr, N, n = 3.3e6, 7, 67
    assert consensus_rate([kr] * N, N, n) * (N * N - N) * 3 * n == pytest.approx(kr, rel=1e-14)
    assert consensus_rate([kr, kr / 10, kr], N, n) == pytest.approx(consensus_rate([kr / 10], N, n))
    for N2 in (3, 5, 9):
        ratio = consensus_rate([kr], N2, n) / consensus_rate([kr], 7, n)
        assert ratio == pytest.approx(42 / (N2 * N2 - N2), rel=1e-14)
    with pytest.raises(ValueError):
        consensus_rate([], 3, 8)


def test_observed_stats_validation():
    with pytest.raises(ValueError):
        ObservedStats((1, 2, 3), (1, 2, 3), (2, 0, 0), (0, 0, 0))   # more errors than events


# -- DM-CV ----------------------------------------------------------------------

CV = CvModelParams()


def test_constellation():
    pts = [cv_amplitude(CV, x) for x in range(4)]
    assert all(abs(abs(p) - CV.alpha) < 1e-15 for p in pts)
    for x in range(4):
        assert pts[(x + 1) % 4] == pytest.approx(pts[x] * 1j)


@pytest.mark.parametrize("cv", [CV, CvModelParams(eta=0.3, xi=0.05), CvModelParams(alpha=1.5, delta_a=0.1)])
def test_heterodyne_normalization_and_discard_oracle(cv):
    # |gamma|^2 is noncentral chi-square: 2|gamma|^2/s ~ ncx2(2, 2|mu|^2/s)
    s = 1 + cv.eta * cv.xi / 2
    for x in range(4):
        t = cv_outcome_probabilities("heterodyne", cv, x)
        assert min(t.values()) >= 0
        mu2 = cv.eta * cv.alpha ** 2
        discard = sps.ncx2.cdf(2 * cv.delta_a ** 2 / s, 2, 2 * mu2 / s)
        assert sum(t[j] for j in range(4)) + discard == pytest.approx(1.0, abs=1e-6)


def test_heterodyne_sectors_monte_carlo():
    cv = CV
    rng = np.random.default_rng(0)
    s = 1 + cv.eta * cv.xi / 2
    mu = math.sqrt(cv.eta) * cv_amplitude(cv, 0)
    k = 400_000
    g = mu + rng.normal(0, math.sqrt(s / 2), k) + 1j * rng.normal(0, math.sqrt(s / 2), k)
    keep = np.abs(g) >= cv.delta_a
    sector = np.floor(np.mod(np.angle(g), 2 * np.pi) / (np.pi / 2)).astype(int)
    t = cv_outcome_probabilities("heterodyne", cv, 0)
    for j in range(4):
        emp = np.mean(keep & (sector == j))
        assert abs(emp - t[j]) < 5 * math.sqrt(t[j] * (1 - t[j]) / k)


def test_heterodyne_phase_cut_discards_more():
    a = cv_outcome_probabilities("heterodyne", CV, 0)
    b = cv_outcome_probabilities("heterodyne", replace(CV, delta_p=0.2), 0)
    assert b["discard"] > a["discard"]
    assert sum(b[j] for j in range(4)) + b["discard"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("cv", [CV, CvModelParams(eta=0.2, xi=0.1)])
def test_homodyne_against_normal_cdf(cv):
    sd = math.sqrt((cv.eta * cv.xi + 1) / 2)
    for x in range(4):
        a = cv_amplitude(cv, x)
        t = cv_outcome_probabilities("homodyne", cv, x)
        for q, mean in (("q", math.sqrt(2 * cv.eta) * a.real), ("p", math.sqrt(2 * cv.eta) * a.imag)):
            assert t[q][0] == pytest.approx(sps.norm.sf(cv.delta_c, mean, sd), rel=1e-9)
            assert t[q][1] == pytest.approx(sps.norm.cdf(-cv.delta_c, mean, sd), rel=1e-9)
            disc = sps.norm.cdf(cv.delta_c, mean, sd) - sps.norm.cdf(-cv.delta_c, mean, sd)
            assert sum(t[q].values()) == pytest.approx(1.0, abs=1e-12)
            assert t[q]["discard"] == pytest.approx(disc, abs=1e-9)


def test_error_terms_structure():
    het = cv_error_correction_terms("heterodyne", CV)
    assert het.h_z == pytest.approx(2.0)          # symmetric constellation
    assert 0 < het.h_z_given_x < het.h_z
    assert het.delta_ec == pytest.approx((1 - CV.beta) * het.h_z + CV.beta * het.h_z_given_x)
    hom = cv_error_correction_terms("homodyne", CV)
    assert hom["q"].p_pass == pytest.approx(hom["p"].p_pass)


def test_large_amplitude_limit():
    # well separated states leave no uncertainty about the symbol
    vals = [cv_error_correction_terms("heterodyne", CvModelParams(alpha=a, xi=0.0)).h_z_given_x
            for a in (0.72, 2.0, 4.0, 6.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6
    hom = cv_error_correction_terms("homodyne", CvModelParams(alpha=6.0, xi=0.0))
    assert hom["q"].h_z_given_x < 1e-6


def test_bad_mode():
    with pytest.raises(ValueError):
        cv_outcome_probabilities("photon", CV, 0)
    with pytest.raises(ValueError):
        cv_outcome_probabilities("heterodyne", CV, 4)


def test_golden_fixtures():
    gold = json.loads(GOLDEN.read_text())
    assert gold["params"]["alpha"] == CV.alpha
    for x in range(4):
        t = cv_outcome_probabilities("heterodyne", CV, x)
        for k, v in gold["heterodyne"]["tables"][x].items():
            assert t[int(k) if k.isdigit() else k] == pytest.approx(v, rel=1e-9, abs=1e-12)
        h = cv_outcome_probabilities("homodyne", CV, x)
        for q in ("q", "p"):
            for k, v in gold["homodyne"]["tables"][x][q].items():
                assert h[q][int(k) if k.isdigit() else k] == pytest.approx(v, rel=1e-9, abs=1e-12)
    het = cv_error_correction_terms("heterodyne", CV)
    for name, v in gold["heterodyne"]["terms"].items():
        assert getattr(het, name) == pytest.approx(v, rel=1e-9)
    hom = cv_error_correction_terms("homodyne", CV)
    for q, terms in gold["homodyne"]["terms"].items():
        for name, v in terms.items():
            assert getattr(hom[q], name) == pytest.approx(v, rel=1e-9)
