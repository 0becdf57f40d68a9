"""Physical-layer ground truth for the two-antenna link.

The ER reports a scalar RSSI for each transmission.  With beamforming
vector ``[1, exp(j*theta)]`` and unit transmit symbol the noiseless RSSI is

    R(theta) = alpha + beta * cos(theta + phi)

where ``alpha = |h1|^2 + |h2|^2``, ``beta = 2|h1||h2|`` and ``phi = d2 - d1``.
Measurement noise is additive Gaussian on the RSSI itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rssibeam.errors import DomainError

TWO_PI = 2.0 * math.pi


def wrap_2pi(angle):
    """Map angle(s) into [0, 2*pi)."""
    out = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def wrap_pi(angle):
    """Map angle(s) into (-pi, pi]."""
    out = math.pi - np.mod(math.pi - np.asarray(angle, dtype=float), TWO_PI)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ChannelPair:
    """Complex channel gains from the two ET antennas to the ER."""

    mag1: float
    phase1: float
    mag2: float
    phase2: float

    def __post_init__(self):
        if not (self.mag1 >= 0 and self.mag2 >= 0):
            raise DomainError(f"channel magnitudes must be >= 0, got {self.mag1}, {self.mag2}")
        object.__setattr__(self, "mag1", float(self.mag1))
        object.__setattr__(self, "mag2", float(self.mag2))
        object.__setattr__(self, "phase1", wrap_2pi(float(self.phase1)))
        object.__setattr__(self, "phase2", wrap_2pi(float(self.phase2)))

    @classmethod
    def from_complex(cls, h1: complex, h2: complex) -> ChannelPair:
        return cls(abs(h1), float(np.angle(h1)), abs(h2), float(np.angle(h2)))

    @property
    def h1(self) -> complex:
        return self.mag1 * complex(math.cos(self.phase1), math.sin(self.phase1))

    @property
    def h2(self) -> complex:
        return self.mag2 * complex(math.cos(self.phase2), math.sin(self.phase2))


@dataclass(frozen=True)
class ParamVector:
    """RSSI model parameters (alpha, beta, phi); phi is kept in (-pi, pi]."""

    alpha: float
    beta: float
    phi: float

    def __post_init__(self):
        alpha, beta = float(self.alpha), float(self.beta)
        if alpha < 0 or beta < 0:
            raise DomainError(f"alpha and beta must be >= 0, got {alpha}, {beta}")
        if beta > alpha * (1.0 + 1e-12):
            raise DomainError(f"beta={beta} exceeds alpha={alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "phi", wrap_pi(float(self.phi)))

    @property
    def peak(self) -> float:
        """RSSI under coherent combining, alpha + beta."""
        return self.alpha + self.beta


@dataclass(frozen=True)
class BeamformingVector:
    """Weights ``[1, exp(j*theta)]``; only the relative phase is stored."""

    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_2pi(float(self.theta)))

    @property
    def weights(self) -> np.ndarray:
        return np.array([1.0, np.exp(1j * self.theta)])


@dataclass(frozen=True)
class NoiseModel:
    """I.i.d. zero-mean Gaussian RSSI noise.

    ``clamp`` truncates noisy RSSI at zero.  It is off by default because
    the estimators assume untruncated Gaussian noise.
    """

    sigma: float
    clamp: bool = False

    def __post_init__(self):
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))


@dataclass(frozen=True)
class RssiObservation:
    theta: float
    value: float


@dataclass(frozen=True)
class HarvestModel:
    """Linear harvester with RF-to-DC conversion efficiency ``xi``."""

    xi: float = 1.0

    def __post_init__(self):
        if not 0 < self.xi <= 1:
            raise DomainError(f"conversion efficiency must lie in (0, 1], got {self.xi}")
        object.__setattr__(self, "xi", float(self.xi))


def derive_params(ch: ChannelPair) -> ParamVector:
    return ParamVector(
        alpha=ch.mag1**2 + ch.mag2**2,
        beta=2.0 * ch.mag1 * ch.mag2,
        phi=ch.phase2 - ch.phase1,
    )


def rssi_mean(p: ParamVector, theta):
    """Noiseless RSSI at training phase(s) ``theta``; accepts arrays."""
    out = p.alpha + p.beta * np.cos(np.asarray(theta, dtype=float) + p.phi)
    if np.ndim(out) == 0:
        return float(out)
    return out


def baseband_power(ch: ChannelPair, b: BeamformingVector) -> float:
    """Received power ``|h1 + h2 exp(j*theta)|^2`` for unit transmit symbol."""
    y = np.dot(np.array([ch.h1, ch.h2]), b.weights)
    return float(abs(y) ** 2)


def sample_rssi(
    p: ParamVector, theta: float, noise: NoiseModel, rng: np.random.Generator
) -> RssiObservation:
    """Draw one noisy RSSI reading.  A draw is consumed even when sigma is 0."""
    w = rng.standard_normal()
    value = rssi_mean(p, theta) + noise.sigma * w
    if noise.clamp:
        value = max(value, 0.0)
    return RssiObservation(theta=wrap_2pi(float(theta)), value=float(value))


def sample_rssi_array(p: ParamVector, thetas, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    values = rssi_mean(p, thetas) + noise.sigma * rng.standard_normal(thetas.shape)
    if noise.clamp:
        values = np.maximum(values, 0.0)
    return values


def harvested_energy(mean_power: float, h: HarvestModel, duration: float) -> float:
    """Energy harvested over ``duration`` at average received power ``mean_power``.

    Feed the model mean here, never a noisy RSSI sample.
    """
    if mean_power < 0:
        raise DomainError(f"mean power must be >= 0, got {mean_power}")
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    return h.xi * mean_power * duration
