import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssibeam.codebook import Codebook, uniform_codebook
from rssibeam.errors import CodebookMismatch, ContractError, IndeterminatePhase
from rssibeam.estimator import (
    PhaseEstimate,
    RssiVector,
    ml_oracle_grid,
    ml_phase,
    noiseless_phase,
    residual_cost,
    resolve_ambiguity,
    stationarity_residual,
    wpb_vector,
)
from rssibeam.model import ParamVector, rssi_mean, wrap_pi


def noiseless(p, n):
    cb = uniform_codebook(n)
    return RssiVector.from_arrays(cb.thetas, rssi_mean(p, cb.as_array()))


def noisy(p, n, sigma, rng):
    cb = uniform_codebook(n)
    return RssiVector.from_arrays(cb.thetas, rssi_mean(p, cb.as_array()) + sigma * rng.standard_normal(n))


def phase_gap(a, b):
    return abs(wrap_pi(a - b))


def contains_mod_pi(candidates, phi, tol):
    return min(phase_gap(c, phi) for c in candidates) <= tol


def brute_grid_oracle(r, n_alpha, n_beta, n_phi):
    """Full triple loop over the grid; independent of the beta-vertex shortcut."""
    R, t = r.values, r.thetas
    rmax = R.max()
    alphas = np.linspace(0, 2 * rmax, n_alpha)
    betas = np.linspace(0, rmax, n_beta)
    phis = -math.pi + 2 * math.pi * np.arange(1, n_phi + 1) / n_phi
    A, B, P = np.meshgrid(alphas, betas, phis, indexing="ij")
    model = A[..., None] + B[..., None] * np.cos(t + P[..., None])
    E = ((R - model) ** 2).sum(axis=-1)
    E[B > A * (1 + 1e-12)] = np.inf
    i = np.unravel_index(np.argmin(E), E.shape)
    return alphas[i[0]], betas[i[1]], phis[i[2]]


# --- noiseless three-point solve -------------------------------------------------

def test_noiseless_phase_uniform_triple():
    t = uniform_codebook(3).thetas
    for phi in (math.pi / 4, 0.0):
        R = [2 + math.cos(phi + ti) for ti in t]
        est = noiseless_phase(*R, *t)
        assert contains_mod_pi(est.candidates, phi, 1e-10)
        assert not est.ambiguity_resolved


def test_noiseless_phase_flat_rssi():
    t = uniform_codebook(3).thetas
    with pytest.raises(IndeterminatePhase):
        noiseless_phase(2.0, 2.0, 2.0, *t)


def test_noiseless_phase_needs_distinct_phases():
    with pytest.raises(IndeterminatePhase):
        noiseless_phase(1.0, 2.0, 3.0, 0.5, 0.5, 2.0)


@settings(max_examples=300)
@given(
    st.floats(0.5, 5), st.floats(0.05, 1), st.floats(-math.pi, math.pi),
    st.lists(st.floats(0, 2 * math.pi), min_size=3, max_size=3),
)
def test_noiseless_phase_arbitrary_triples(alpha, frac, phi, t):
    gaps = [abs(math.sin((a - b) / 2)) for a, b in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2]))]
    if min(gaps) < 0.05:
        return
    p = ParamVector(alpha, alpha * frac, phi)
    R = [rssi_mean(p, ti) for ti in t]
    est = noiseless_phase(*R, *t)
    assert phase_gap(est.phi_hat, p.phi) < 1e-9


# --- ML estimate -------------------------------------------------------------------

def test_ml_phase_worked_n4():
    s3 = math.sqrt(3) / 2
    r = RssiVector.from_arrays(uniform_codebook(4).thetas, [2.5, 2 - s3, 1.5, 2 + s3])
    assert ml_phase(r).phi_hat == pytest.approx(math.pi / 3, abs=1e-12)


def test_ml_phase_n3_zero():
    assert ml_phase(noiseless(ParamVector(2, 1, 0), 3)).phi_hat == pytest.approx(0.0, abs=1e-10)


def test_ml_phase_flat():
    with pytest.raises(IndeterminatePhase):
        ml_phase(RssiVector.from_arrays(uniform_codebook(5).thetas, [1.0] * 5))


def test_ml_phase_rejects_non_uniform():
    r = RssiVector.from_arrays([0.0, 1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(CodebookMismatch):
        ml_phase(r)
    with pytest.raises(CodebookMismatch):
        ml_phase(r, Codebook((0.0, 1.0, 2.0)))


@settings(max_examples=200)
@given(st.floats(0.5, 5), st.floats(0.01, 1), st.floats(-math.pi, math.pi), st.integers(3, 12))
def test_ml_phase_noiseless_exact(alpha, frac, phi, n):
    p = ParamVector(alpha, alpha * frac, phi)
    assert phase_gap(ml_phase(noiseless(p, n)).phi_hat, p.phi) < 1e-9


@settings(max_examples=100)
@given(st.floats(0.5, 5), st.floats(0.01, 1), st.floats(-math.pi, math.pi))
def test_three_point_and_ml_candidates_agree(alpha, frac, phi):
    p = ParamVector(alpha, alpha * frac, phi)
    r = noiseless(p, 3)
    a = noiseless_phase(*r.values, *r.thetas)
    b = ml_phase(r)
    assert phase_gap(2 * a.phi_hat, 2 * b.phi_hat) < 2e-9


@settings(max_examples=100)
@given(st.integers(3, 12), st.floats(-50, 50), st.floats(0.01, 100), st.integers(0, 2**32 - 1))
def test_ml_phase_nuisance_free(n, shift, scale, seed):
    rng = np.random.default_rng(seed)
    r = noisy(ParamVector(2, 1, rng.uniform(-3, 3)), n, 0.3, rng)
    base = ml_phase(r).phi_hat
    shifted = RssiVector.from_arrays(r.thetas, r.values + shift)
    scaled = RssiVector.from_arrays(r.thetas, r.values * scale)
    assert phase_gap(ml_phase(shifted).phi_hat, base) < 1e-9
    assert phase_gap(ml_phase(scaled).phi_hat, base) < 1e-12


# --- cost, stationarity ----------------------------------------------------------

def test_residual_cost_zero_cases():
    p = ParamVector(2, 1, 0.7)
    assert residual_cost(p, noiseless(p, 5)) == pytest.approx(0.0, abs=1e-24)
    zeros = RssiVector.from_arrays(uniform_codebook(4).thetas, [0.0] * 4)
    assert residual_cost(ParamVector(0, 0, 1.3), zeros) == 0.0


def test_residual_cost_grows_away_from_truth():
    p = ParamVector(2, 1, 0.7)
    r = noiseless(p, 5)
    for eps in (1e-3, -1e-3, 0.1):
        assert residual_cost(ParamVector(2, 1, 0.7 + eps), r) > 0


def test_stationarity_at_ml_solution():
    rng = np.random.default_rng(11)
    h = 1e-6
    for n in (3, 5, 8):
        r = noisy(ParamVector(2, 1, 0.4), n, 0.2, rng)
        phi = ml_phase(r).phi_hat
        # nuisance fit by least squares at fixed phi
        X = np.column_stack([np.ones(n), np.cos(r.thetas + phi)])
        alpha, beta = np.linalg.lstsq(X, r.values, rcond=None)[0]
        p = ParamVector(alpha, beta, phi)
        assert abs(stationarity_residual(p, r)) < 1e-8
        fd = (residual_cost(ParamVector(alpha, beta, phi + h), r)
              - residual_cost(ParamVector(alpha, beta, phi - h), r)) / (2 * h)
        assert fd == pytest.approx(2 * beta * stationarity_residual(p, r), abs=1e-6)


# --- grid oracle -------------------------------------------------------------------

def test_grid_oracle_noiseless():
    p = ParamVector(3, 1.5, 1.0)
    r = noiseless(p, 5)
    got = ml_oracle_grid(r)
    assert phase_gap(got.phi, 1.0) <= 2 * math.pi / 3600
    alpha_step = 2 * r.values.max() / 199
    assert abs(got.alpha - 3) <= alpha_step


@pytest.mark.parametrize("seed", range(5))
def test_grid_oracle_matches_full_scan(seed):
    rng = np.random.default_rng(seed)
    r = noisy(ParamVector(2, 1, rng.uniform(-3, 3)), 4, 0.3, rng)
    got = ml_oracle_grid(r, n_alpha=25, n_beta=25, n_phi=120)
    want = brute_grid_oracle(r, 25, 25, 120)
    assert (got.alpha, got.beta, got.phi) == pytest.approx(want, abs=1e-12)


def test_grid_oracle_agrees_with_ml_noisy():
    rng = np.random.default_rng(99)
    step = 2 * math.pi / 3600
    hits = 0
    for _ in range(20):
        r = noisy(ParamVector(2, 1, rng.uniform(-math.pi, math.pi)), 5, 0.1, rng)
        hits += phase_gap(ml_oracle_grid(r).phi, ml_phase(r).phi_hat) <= 2 * step
    assert hits >= 19


# --- ambiguity and WPB vector ----------------------------------------------------

def test_resolve_picks_coherent_candidate():
    p = ParamVector(2, 2, math.pi / 4)
    calls = []

    def probe(theta):
        calls.append(theta)
        return rssi_mean(p, theta)

    est = resolve_ambiguity(PhaseEstimate(math.pi / 4 - math.pi), probe)
    assert est.ambiguity_resolved
    assert est.phi_hat == pytest.approx(math.pi / 4)
    assert len(calls) == 2
    assert calls[0] == pytest.approx(-(math.pi / 4 - math.pi))


def test_resolve_tie_keeps_first():
    est = resolve_ambiguity((0.3, 0.3 - math.pi), lambda theta: 1.0)
    assert est.phi_hat == pytest.approx(0.3)


def test_resolve_propagates_probe_failure():
    def probe(theta):
        raise OSError("link down")

    with pytest.raises(OSError):
        resolve_ambiguity(PhaseEstimate(0.1), probe)


def test_resolution_error_rate_falls_with_snr():
    rng = np.random.default_rng(3)
    rates = []
    for sigma in (3.0, 1.0, 0.3):
        p = ParamVector(1, 1, 0.5)
        wrong = 0
        for _ in range(2000):
            est = resolve_ambiguity(PhaseEstimate(0.5), lambda th: rssi_mean(p, th) + sigma * rng.standard_normal())
            wrong += phase_gap(est.phi_hat, 0.5) > 1
        rates.append(wrong / 2000)
    assert rates[0] > rates[1] > rates[2]


def test_wpb_vector():
    assert wpb_vector(PhaseEstimate(0.0, True)).theta == 0.0
    assert wpb_vector(PhaseEstimate(math.pi / 3, True)).theta == pytest.approx(5 * math.pi / 3)
    p = ParamVector(2, 1, math.pi / 3)
    assert rssi_mean(p, wpb_vector(PhaseEstimate(p.phi, True)).theta) == pytest.approx(p.alpha + p.beta)
    with pytest.raises(ContractError):
        wpb_vector(PhaseEstimate(0.2))
