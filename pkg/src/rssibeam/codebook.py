"""Training codebooks and Cramer-Rao bounds for the channel phase difference.

The RSSI vector is Gaussian with mean ``alpha + beta*cos(theta_i + phi)`` and
covariance ``sigma^2 I``, so the Fisher information of (alpha, beta, phi) is
``J.T @ J / sigma^2`` with Jacobian rows ``[1, cos(theta_i+phi), -beta*sin(theta_i+phi)]``.
The closed-form bounds below are the (phi, phi) entry of its inverse, written
with the pair and triple sums that fall out of Cauchy-Binet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from rssibeam.errors import DomainError, InvalidCodebookSize, UnboundedCRLB
from rssibeam.model import TWO_PI, NoiseModel, ParamVector, wrap_2pi

MIN_TRAINING = 3

# Per-triple floor below which the triple sum counts as zero.  Exact
# duplicates give exactly 0.0; near-duplicates at spread eps give ~eps**6.
_DEGENERATE_PER_TRIPLE = 1e-24


@dataclass(frozen=True)
class Codebook:
    """Ordered training phases, each stored in [0, 2*pi).

    Duplicate phases are allowed at construction so degenerate designs can be
    represented; bound computations reject them with :class:`UnboundedCRLB`.
    """

    thetas: tuple[float, ...]

    def __post_init__(self):
        thetas = tuple(wrap_2pi(float(t)) for t in self.thetas)
        if len(thetas) < MIN_TRAINING:
            raise InvalidCodebookSize(
                f"a codebook needs N >= {MIN_TRAINING} phases (got {len(thetas)}); "
                "the phase bound is unbounded for fewer"
            )
        object.__setattr__(self, "thetas", thetas)

    def __len__(self) -> int:
        return len(self.thetas)

    def __iter__(self):
        return iter(self.thetas)

    @property
    def n(self) -> int:
        return len(self.thetas)

    def as_array(self) -> np.ndarray:
        return np.array(self.thetas)

    def degrees(self) -> list[float]:
        return [math.degrees(t) for t in self.thetas]

    def is_distinct(self, atol: float = 1e-12) -> bool:
        t = np.sort(self.as_array())
        gaps = np.diff(np.append(t, t[0] + TWO_PI))
        return bool(np.all(gaps > atol))

    def is_uniform(self, atol: float = 1e-9) -> bool:
        """True if the phases are ``2*pi*(i-1)/N`` in index order."""
        ref = uniform_codebook(self.n).as_array()
        diff = np.abs(np.angle(np.exp(1j * (self.as_array() - ref))))
        return bool(np.all(diff <= atol))


def uniform_codebook(n: int) -> Codebook:
    """Equally spaced phases ``{0, 2pi/n, ..., 2(n-1)pi/n}``."""
    if n < MIN_TRAINING:
        raise InvalidCodebookSize(f"N >= {MIN_TRAINING} is required, got N={n}")
    return Codebook(tuple(2.0 * math.pi * i / n for i in range(n)))


@lru_cache(maxsize=128)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.array(list(combinations(range(n), 2)), dtype=np.intp).reshape(-1, 2)
    return idx[:, 0], idx[:, 1]


@lru_cache(maxsize=128)
def _triples(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = np.array(list(combinations(range(n), 3)), dtype=np.intp).reshape(-1, 3)
    return idx[:, 0], idx[:, 1], idx[:, 2]


def delta_ijk(ti, tj, tk):
    """Squared sine sum ``[sin(ti-tj) + sin(tj-tk) + sin(tk-ti)]^2``; broadcasts."""
    s = np.sin(np.subtract(ti, tj)) + np.sin(np.subtract(tj, tk)) + np.sin(np.subtract(tk, ti))
    out = s * s
    if np.ndim(out) == 0:
        return float(out)
    return out


def _triple_sum(thetas: np.ndarray) -> np.ndarray:
    """Sum of delta_ijk over i<j<k along the last axis."""
    i, j, k = _triples(thetas.shape[-1])
    return delta_ijk(thetas[..., i], thetas[..., j], thetas[..., k]).sum(axis=-1)


def _degenerate(denominator, n: int):
    return denominator <= _DEGENERATE_PER_TRIPLE * math.comb(n, 3)


def _check_sigma_beta(beta: float, sigma: float) -> None:
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0 for a finite bound, got {sigma}")
    if not beta > 0:
        raise UnboundedCRLB(f"beta must be > 0 for a finite bound, got {beta}")


def fim(cb: Codebook, p: ParamVector, noise: NoiseModel) -> np.ndarray:
    """Fisher information of (alpha, beta, phi) as a symmetric 3x3 array."""
    if not noise.sigma > 0:
        raise DomainError("Fisher information is undefined for sigma = 0")
    u = cb.as_array() + p.phi
    jac = np.column_stack([np.ones_like(u), np.cos(u), -p.beta * np.sin(u)])
    return jac.T @ jac / noise.sigma**2


def crlb_phi(cb: Codebook, p: ParamVector, noise: NoiseModel) -> float:
    """Cramer-Rao bound on the variance of an unbiased estimate of phi."""
    _check_sigma_beta(p.beta, noise.sigma)
    t = cb.as_array()
    den = _triple_sum(t)
    if _degenerate(den, cb.n):
        raise UnboundedCRLB("codebook is degenerate (triple sum vanishes); CRLB is unbounded")
    c = np.cos(t + p.phi)
    i, j = _pairs(cb.n)
    num = np.sum((c[i] - c[j]) ** 2)
    return float(noise.sigma**2 * num / (p.beta**2 * den))


def mcrlb_batch(thetas, beta: float = 1.0, sigma: float = 1.0) -> np.ndarray:
    """MCRLB for a stack of codebooks, shape (..., N).  Degenerate rows give inf."""
    t = np.asarray(thetas, dtype=float)
    n = t.shape[-1]
    i, j = _pairs(n)
    num = np.sum(1.0 - np.cos(t[..., i] - t[..., j]), axis=-1)
    den = _triple_sum(t)
    bad = _degenerate(den, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sigma**2 * num / (beta**2 * np.where(bad, 1.0, den))
    return np.where(bad, np.inf, out)


def mcrlb_phi(cb: Codebook, beta: float, noise: NoiseModel) -> float:
    """CRLB of phi averaged over phi uniform on the circle.

    Only the numerator depends on phi, so the average reduces to replacing
    ``[cos(ti+phi) - cos(tj+phi)]^2`` by its mean ``1 - cos(ti - tj)``.
    """
    _check_sigma_beta(beta, noise.sigma)
    value = float(mcrlb_batch(cb.as_array(), beta, noise.sigma))
    if math.isinf(value):
        raise UnboundedCRLB("codebook is degenerate (triple sum vanishes); MCRLB is unbounded")
    return value


def brute_force_optimal_codebook(n: int, grid_step: float) -> tuple[Codebook, float]:
    """Exhaustive MCRLB minimisation over a phase grid with theta_1 = 0.

    Every other phase ranges over ``{0, step, ..., 2*pi - step}``.  Ties within
    a relative 1e-12 go to the lexicographically smallest grid tuple.

    Returns:
        The minimising codebook and its MCRLB at beta = sigma = 1.
    """
    if n not in (3, 4):
        raise DomainError(f"brute force search supports n in {{3, 4}}, got {n}")
    m = round(TWO_PI / grid_step)
    if m < 1 or abs(m * grid_step - TWO_PI) > 1e-9:
        raise DomainError(f"grid step {grid_step} does not divide 2*pi")
    grid = np.arange(m) * (TWO_PI / m)

    if n == 3:
        t2, t3 = np.meshgrid(grid, grid, indexing="ij")
        stack = np.stack([np.zeros_like(t2), t2, t3], axis=-1)
        values = mcrlb_batch(stack).ravel()
    else:
        values = np.empty(m**3)
        t3, t4 = np.meshgrid(grid, grid, indexing="ij")
        zeros = np.zeros_like(t3)
        for a, t2 in enumerate(grid):
            stack = np.stack([zeros, np.full_like(t3, t2), t3, t4], axis=-1)
            values[a * m * m : (a + 1) * m * m] = mcrlb_batch(stack).ravel()

    best = values.min()
    first = int(np.flatnonzero(values <= best * (1.0 + 1e-12))[0])
    idx = np.unravel_index(first, (m,) * (n - 1))
    thetas = (0.0,) + tuple(float(grid[k]) for k in idx)
    return Codebook(thetas), float(values[first])
