import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssibeam.codebook import (
    Codebook,
    brute_force_optimal_codebook,
    crlb_phi,
    delta_ijk,
    fim,
    mcrlb_batch,
    mcrlb_phi,
    uniform_codebook,
)
from rssibeam.errors import DomainError, InvalidCodebookSize, UnboundedCRLB
from rssibeam.model import NoiseModel, ParamVector

UNIT = NoiseModel(1.0)


def inverse_fim_phi(thetas, alpha, beta, phi, sigma):
    """Independent oracle: build the Jacobian by hand and invert numerically."""
    rows = [[1.0, math.cos(t + phi), -beta * math.sin(t + phi)] for t in thetas]
    J = np.array(rows)
    F = J.T @ J / sigma**2
    return np.linalg.inv(F)[2, 2]


def test_uniform_codebook_values():
    assert uniform_codebook(3).thetas == pytest.approx((0, 2 * math.pi / 3, 4 * math.pi / 3))
    assert uniform_codebook(4).thetas == pytest.approx((0, math.pi / 2, math.pi, 3 * math.pi / 2))
    with pytest.raises(InvalidCodebookSize):
        uniform_codebook(2)


def test_codebook_normalises_and_checks():
    cb = Codebook((0.0, -math.pi / 2, 5 * math.pi))
    assert cb.thetas == pytest.approx((0, 3 * math.pi / 2, math.pi))
    assert not Codebook((0.0, 0.0, math.pi)).is_distinct()
    assert uniform_codebook(7).is_uniform()
    assert not Codebook((0.0, 1.0, 2.0)).is_uniform()


def test_fim_examples():
    F = fim(uniform_codebook(3), ParamVector(2, 1, 0), UNIT)
    assert F[0, 0] == pytest.approx(3.0)
    assert np.allclose(F, F.T)
    assert np.all(np.linalg.eigvalsh(F) > -1e-12)
    G = fim(uniform_codebook(4), ParamVector(2, 1, 0.4), UNIT)
    assert np.linalg.inv(G)[2, 2] == pytest.approx(0.5, rel=1e-10)
    same = fim(Codebook((0.7, 0.7, 0.7)), ParamVector(2, 1, 0.2), UNIT)
    assert abs(np.linalg.det(same)) < 1e-10


def test_fim_needs_noise():
    with pytest.raises(DomainError):
        fim(uniform_codebook(3), ParamVector(2, 1, 0), NoiseModel(0.0))


def test_delta_examples():
    assert delta_ijk(0, 0, math.pi) == pytest.approx(0.0, abs=1e-30)
    # each sine is -sqrt(3)/2
    assert delta_ijk(0, 2 * math.pi / 3, 4 * math.pi / 3) == pytest.approx(27 / 4)


@given(st.floats(-7, 7), st.floats(-7, 7), st.floats(-7, 7))
def test_delta_cyclic_and_nonnegative(a, b, c):
    d = delta_ijk(a, b, c)
    assert d >= 0
    assert d == pytest.approx(delta_ijk(b, c, a), abs=1e-12)


def test_crlb_hand_value_n3():
    # numerator 2.25 + 2.25 + 0 = 4.5, denominator 27/4
    assert crlb_phi(uniform_codebook(3), ParamVector(2, 1, 0), UNIT) == pytest.approx(4.5 / 6.75, rel=1e-12)


def test_crlb_uniform_n4_is_half_for_any_phi():
    for phi in np.linspace(-math.pi, math.pi, 17):
        assert crlb_phi(uniform_codebook(4), ParamVector(1, 1, phi), UNIT) == pytest.approx(0.5, rel=1e-12)


def test_crlb_degenerate_raises():
    with pytest.raises(UnboundedCRLB):
        crlb_phi(Codebook((0.0, 0.0, math.pi)), ParamVector(2, 1, 0), UNIT)
    with pytest.raises(UnboundedCRLB):
        mcrlb_phi(Codebook((0.0, 0.0, math.pi)), 1.0, UNIT)


def test_crlb_matches_fim_inversion_random():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(3, 12))
        thetas = rng.uniform(0, 2 * math.pi, n)
        alpha = rng.uniform(0.5, 5)
        beta = rng.uniform(0.05, 1) * alpha
        phi = rng.uniform(-math.pi, math.pi)
        sigma = rng.uniform(0.05, 3)
        got = crlb_phi(Codebook(tuple(thetas)), ParamVector(alpha, beta, phi), NoiseModel(sigma))
        assert got == pytest.approx(inverse_fim_phi(thetas, alpha, beta, phi, sigma), rel=1e-8)


def test_mcrlb_is_phi_average_of_crlb():
    rng = np.random.default_rng(7)
    grid = 2 * math.pi * np.arange(360) / 360
    for _ in range(50):
        n = int(rng.integers(3, 9))
        cb = Codebook(tuple(rng.uniform(0, 2 * math.pi, n)))
        mean = np.mean([crlb_phi(cb, ParamVector(1, 1, phi), UNIT) for phi in grid])
        assert mcrlb_phi(cb, 1.0, UNIT) == pytest.approx(mean, rel=1e-6)


@pytest.mark.parametrize("n", [3, 4, 5, 9, 16])
def test_uniform_crlb_phi_invariant(n):
    grid = 2 * math.pi * np.arange(360) / 360
    vals = np.array([crlb_phi(uniform_codebook(n), ParamVector(1, 1, phi), UNIT) for phi in grid])
    assert (vals.max() - vals.min()) / vals.mean() <= 1e-9


@pytest.mark.parametrize("n", range(3, 65))
def test_mcrlb_uniform_is_two_over_n(n):
    assert mcrlb_phi(uniform_codebook(n), 1.0, UNIT) == pytest.approx(2 / n, abs=1e-9)


def test_mcrlb_scale_law():
    cb = Codebook((0.1, 1.3, 2.0, 4.4))
    base = mcrlb_phi(cb, 1.0, UNIT)
    assert mcrlb_phi(cb, 1.0, NoiseModel(2.0)) == pytest.approx(4 * base, rel=1e-14)
    assert mcrlb_phi(cb, 2.0, UNIT) == pytest.approx(base / 4, rel=1e-14)


@pytest.mark.parametrize("n", range(3, 11))
def test_random_codebooks_never_beat_uniform(n):
    rng = np.random.default_rng(100 + n)
    vals = mcrlb_batch(rng.uniform(0, 2 * math.pi, (1000, n)))
    vals = vals[np.isfinite(vals)]
    assert np.all(vals >= 2 / n - 1e-12)


@settings(max_examples=50)
@given(st.integers(3, 8), st.floats(0, 6.2), st.integers(0, 2**31))
def test_fewer_than_three_distinct_phases_is_singular(n, t0, seed):
    rng = np.random.default_rng(seed)
    two = np.array([t0, t0 + 1.0])
    thetas = two[rng.integers(0, 2, n)]
    F = fim(Codebook(tuple(thetas)), ParamVector(2, 1, 0.3), UNIT)
    scale = np.linalg.norm(F) ** 3
    assert abs(np.linalg.det(F)) < 1e-10 * scale


def equivalent_to_uniform(cb, step):
    """Within one grid step of the uniform set, allowing reflection theta -> -theta."""
    ref = np.array(uniform_codebook(cb.n).thetas)
    for t in (np.array(cb.thetas), np.mod(-np.array(cb.thetas), 2 * math.pi)):
        if np.all(np.abs(np.sort(t) - ref) <= step * (1 + 1e-9)):
            return True
    return False


def test_brute_force_n3():
    cb, value = brute_force_optimal_codebook(3, math.pi / 180)
    assert value == pytest.approx(2 / 3, abs=1e-4)
    assert value >= 2 / 3 - 1e-12
    assert equivalent_to_uniform(cb, math.pi / 180)


def test_brute_force_n4_coarse():
    cb, value = brute_force_optimal_codebook(4, math.pi / 45)
    assert value == pytest.approx(0.5, abs=5e-3)
    assert value >= 0.5 - 1e-12
    assert equivalent_to_uniform(cb, math.pi / 45)


def test_brute_force_rejects_bad_inputs():
    with pytest.raises(DomainError):
        brute_force_optimal_codebook(5, math.pi / 4)
    with pytest.raises(DomainError):
        brute_force_optimal_codebook(3, 0.7)
