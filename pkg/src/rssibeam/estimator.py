"""Channel phase-difference estimation from RSSI feedback.

Two closed-form estimators are provided: an exact three-point solve for
noiseless data and the maximum-likelihood estimate for the uniform
codebook.  Both return a two-candidate :class:`PhaseEstimate` because a
tangent only fixes the phase modulo pi; :func:`resolve_ambiguity` settles it
with two extra beamformed probes.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from rssibeam.codebook import Codebook, uniform_codebook
from rssibeam.errors import CodebookMismatch, ContractError, IndeterminatePhase
from rssibeam.model import BeamformingVector, ParamVector, RssiObservation, wrap_pi

# Both arctangent arguments below this magnitude mean there is no phase to find.
INDETERMINATE_TOL = 1e-12


@dataclass(frozen=True)
class RssiVector:
    """RSSI readings paired with the training phases that produced them."""

    observations: tuple[RssiObservation, ...]

    def __post_init__(self):
        obs = tuple(self.observations)
        if len(obs) < 3:
            raise CodebookMismatch(f"at least 3 RSSI observations are needed, got {len(obs)}")
        object.__setattr__(self, "observations", obs)

    @classmethod
    def from_arrays(cls, thetas: Sequence[float], values: Sequence[float]) -> RssiVector:
        if len(thetas) != len(values):
            raise ValueError("thetas and values differ in length")
        return cls(tuple(RssiObservation(float(t), float(v)) for t, v in zip(thetas, values)))

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def thetas(self) -> np.ndarray:
        return np.array([o.theta for o in self.observations])

    @property
    def values(self) -> np.ndarray:
        return np.array([o.value for o in self.observations])

    @property
    def codebook(self) -> Codebook:
        return Codebook(tuple(self.thetas))


@dataclass(frozen=True)
class PhaseEstimate:
    """Estimated phase difference in (-pi, pi] plus its pi-shifted twin."""

    phi_hat: float
    ambiguity_resolved: bool = False
    candidates: tuple[float, float] = field(default=None)

    def __post_init__(self):
        phi = wrap_pi(float(self.phi_hat))
        object.__setattr__(self, "phi_hat", phi)
        if self.candidates is None:
            object.__setattr__(self, "candidates", (phi, wrap_pi(phi - math.pi)))


def _atan2_checked(num: float, den: float) -> float:
    if abs(num) < INDETERMINATE_TOL and abs(den) < INDETERMINATE_TOL:
        raise IndeterminatePhase("RSSI carries no phase information (beta ~ 0 or degenerate phases)")
    return math.atan2(num, den)


def noiseless_phase(r1: float, r2: float, r3: float, t1: float, t2: float, t3: float) -> PhaseEstimate:
    """Solve three noiseless RSSI equations for phi, for any distinct phases.

    With ``l_1j = R1 - Rj`` the differences factor as
    ``l_1j = -2*beta*sin((t1-tj)/2)*sin((t1+tj)/2 + phi)``; dividing out the
    known sine gives two equations linear in (cos phi, sin phi).  The sign
    factor orients the quotient so noiseless input returns phi itself.
    """
    s12 = math.sin((t1 - t2) / 2.0)
    s13 = math.sin((t1 - t3) / 2.0)
    s23 = math.sin((t2 - t3) / 2.0)
    if min(abs(s12), abs(s13), abs(s23)) < INDETERMINATE_TOL:
        raise IndeterminatePhase("training phases must be pairwise distinct")
    u = (r1 - r2) / s12
    v = (r1 - r3) / s13
    a = (t1 + t2) / 2.0
    b = (t1 + t3) / 2.0
    sign = -math.copysign(1.0, s23)
    num = sign * (v * math.sin(a) - u * math.sin(b))
    den = sign * (u * math.cos(b) - v * math.cos(a))
    return PhaseEstimate(_atan2_checked(num, den))


def ml_phase_sums(values, thetas) -> tuple[np.ndarray, np.ndarray]:
    """Arctangent arguments ``(-sum R sin(theta), sum R cos(theta))`` along the last axis."""
    values = np.asarray(values, dtype=float)
    return -(values @ np.sin(thetas)), values @ np.cos(thetas)


def _check_uniform(r: RssiVector, cb: Codebook | None) -> Codebook:
    n = len(r)
    if cb is None:
        cb = uniform_codebook(n)
    elif not cb.is_uniform():
        raise CodebookMismatch("the ML estimator requires the uniform codebook 2*pi*(i-1)/N")
    if cb.n != n:
        raise CodebookMismatch(f"codebook has {cb.n} phases but {n} observations were given")
    diff = np.abs(np.angle(np.exp(1j * (r.thetas - cb.as_array()))))
    if np.any(diff > 1e-6):
        bad = int(np.argmax(diff))
        raise CodebookMismatch(
            f"observation {bad} has theta={r.thetas[bad]!r}, expected {cb.thetas[bad]!r} "
            "for the uniform codebook"
        )
    return cb


def ml_phase(r: RssiVector, cb: Codebook | None = None) -> PhaseEstimate:
    """Maximum-likelihood phase estimate for the uniform codebook.

    The uniform design zeroes the sums that couple phi to the nuisance
    parameters, leaving ``sum R_i sin(theta_i + phi) = 0``.  The two-argument
    arctangent additionally picks the quadrant with beta > 0.
    """
    cb = _check_uniform(r, cb)
    num, den = ml_phase_sums(r.values, cb.as_array())
    return PhaseEstimate(_atan2_checked(float(num), float(den)))


def residual_cost(p: ParamVector, r: RssiVector) -> float:
    """Sum of squared residuals of the observations under model ``p``."""
    resid = r.values - (p.alpha + p.beta * np.cos(r.thetas + p.phi))
    return float(resid @ resid)


def stationarity_residual(p: ParamVector, r: RssiVector) -> float:
    """Left minus right side of the ML stationarity condition in phi.

    Equals ``dE/dphi / (2*beta)`` where E is :func:`residual_cost`.
    """
    u = r.thetas + p.phi
    lhs = r.values @ np.sin(u)
    rhs = p.alpha * np.sin(u).sum() + 0.5 * p.beta * np.sin(2.0 * u).sum()
    return float(lhs - rhs)


def ml_oracle_grid(
    r: RssiVector,
    n_alpha: int = 200,
    n_beta: int = 200,
    n_phi: int = 3600,
    alpha_range: tuple[float, float] | None = None,
    beta_range: tuple[float, float] | None = None,
) -> ParamVector:
    """Grid minimiser of :func:`residual_cost` over (alpha, beta, phi).

    Test oracle, not a production estimator.  The phi grid is
    ``-pi + 2*pi*k/n_phi`` for k = 1..n_phi; grid points with beta > alpha are
    excluded.  For each (alpha, phi) the cost is a convex parabola in beta,
    so the best beta grid point is the feasible one nearest the vertex; this
    gives the same minimiser as scanning every beta.
    """
    R = r.values
    t = r.thetas
    n = len(R)
    rmax = max(float(R.max()), 0.0)
    a_lo, a_hi = alpha_range or (0.0, 2.0 * rmax)
    b_lo, b_hi = beta_range or (0.0, rmax)
    alphas = np.linspace(a_lo, a_hi, n_alpha)
    betas = np.linspace(b_lo, b_hi, n_beta)
    phis = -math.pi + (2.0 * math.pi / n_phi) * np.arange(1, n_phi + 1)

    c = np.cos(t[None, :] + phis[:, None])  # (phi, N)
    s_rc = c @ R
    s_c = c.sum(axis=1)
    s_cc = (c * c).sum(axis=1)
    s_r, s_rr = R.sum(), R @ R

    a = alphas[:, None]  # (alpha, 1) against (phi,)
    vertex = (s_rc[None, :] - a * s_c[None, :]) / np.where(s_cc > 0, s_cc, 1.0)[None, :]
    db = (b_hi - b_lo) / (n_beta - 1) if n_beta > 1 and b_hi > b_lo else 1.0
    top = np.floor((np.minimum(a, b_hi) - b_lo) / db + 1e-9).astype(int)  # last feasible beta index
    k = np.clip(np.rint((vertex - b_lo) / db), 0, n_beta - 1).astype(int)
    k = np.minimum(k, np.broadcast_to(top, k.shape))
    feasible = top >= 0
    k = np.maximum(k, 0)
    b = betas[k]
    cost = s_rr + n * a * a + b * b * s_cc[None, :] - 2 * a * s_r - 2 * b * s_rc[None, :] + 2 * a * b * s_c[None, :]
    cost = np.where(np.broadcast_to(feasible, cost.shape), cost, np.inf)
    ia, ip = np.unravel_index(int(np.argmin(cost)), cost.shape)
    alpha = float(alphas[ia])
    return ParamVector(alpha, min(float(b[ia, ip]), alpha), float(phis[ip]))


def resolve_ambiguity(
    estimate: PhaseEstimate | tuple[float, float], probe: Callable[[float], float]
) -> PhaseEstimate:
    """Pick between phi_hat and phi_hat - pi with two live RSSI probes.

    Probes beamforming phase ``-phi_hat`` first, then ``-(phi_hat - pi)``,
    and keeps the candidate with the larger reading (ties keep phi_hat).
    """
    if isinstance(estimate, PhaseEstimate):
        first, second = estimate.candidates
    else:
        first, second = (float(x) for x in estimate)
    r_first = probe(-first)
    r_second = probe(-second)
    chosen = first if r_first >= r_second else second
    return PhaseEstimate(chosen, ambiguity_resolved=True, candidates=(wrap_pi(first), wrap_pi(second)))


def wpb_vector(e: PhaseEstimate) -> BeamformingVector:
    """Power-beamforming vector that cancels the estimated phase difference."""
    if not e.ambiguity_resolved:
        raise ContractError("phase estimate must be ambiguity-resolved before power beamforming")
    return BeamformingVector(-e.phi_hat)
