"""Monte Carlo sweeps of estimator error and bound behaviour.

SNR is defined as ``beta^2 / sigma^2``; sweeps hold beta fixed and set
``sigma = beta / sqrt(snr)``.  Every (n, snr) point draws from its own
random stream keyed on ``(seed, n, snr)``, so adding grid points leaves
existing rows untouched, and trial ``k`` of a point is the same whatever
the trial count.
"""

from __future__ import annotations

import math
import struct
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from rssibeam.codebook import mcrlb_batch, mcrlb_phi, uniform_codebook
from rssibeam.estimator import ml_phase_sums
from rssibeam.errors import DomainError
from rssibeam.model import NoiseModel, wrap_pi

# Stream ids inside a point's seed sequence.
_PHI_STREAM = 0
_NOISE_STREAM = 1
_CODEBOOK_STREAM = 2


@dataclass(frozen=True)
class SweepSpec:
    n_values: tuple[int, ...]
    snr_values: tuple[float, ...]
    trials_per_point: int
    rng_seed: int = 0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "snr_values", tuple(float(s) for s in self.snr_values))
        if self.trials_per_point < 1:
            raise DomainError(f"trials_per_point must be >= 1, got {self.trials_per_point}")
        if not self.n_values or min(self.n_values) < 3:
            raise DomainError("n_values must be non-empty with every n >= 3")
        if not self.snr_values or min(self.snr_values) <= 0:
            raise DomainError("snr_values must be non-empty and positive")
        if not 0 < self.beta <= self.alpha:
            raise DomainError("need 0 < beta <= alpha")

    def sigma(self, snr: float) -> float:
        return self.beta / math.sqrt(snr)


@dataclass(frozen=True)
class SweepRow:
    design: str
    n: int
    snr: float
    mae: float
    mcrlb: float
    sample_variance: float
    var_ratio: float
    trials: int
    stderr: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...] = field(default_factory=tuple)

    def row(self, n: int, snr: float | None = None, design: str | None = None) -> SweepRow:
        for r in self.rows:
            if r.n == n and (snr is None or r.snr == snr) and (design is None or r.design == design):
                return r
        raise KeyError((n, snr, design))

    def __iter__(self):
        return iter(self.rows)


def circular_error(phi_hat, phi_true):
    """Absolute wrapped difference ``|wrap(phi_hat - phi_true)|`` in [0, pi]."""
    out = np.abs(wrap_pi(np.subtract(phi_hat, phi_true)))
    if np.ndim(out) == 0:
        return float(out)
    return out


def _float_key(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def point_rng(seed: int, n: int, snr: float, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n), _float_key(snr), stream]))


def _resolve_with_oracle(phi_hat: np.ndarray, phi_true: np.ndarray) -> np.ndarray:
    """Noiseless two-probe resolution; ties keep phi_hat."""
    # probes at -phi_hat and -(phi_hat - pi) return alpha +/- beta*cos(phi - phi_hat)
    keep = np.cos(phi_true - phi_hat) >= 0
    return np.where(keep, phi_hat, wrap_pi(phi_hat - math.pi))


def signed_phase_errors(
    n: int,
    alpha: float,
    beta: float,
    sigma: float,
    trials: int,
    phi_rng: np.random.Generator | None,
    noise_rng: np.random.Generator,
    phi: float | None = None,
) -> np.ndarray:
    """Wrapped signed errors of the resolved ML estimate over ``trials`` draws.

    ``phi`` fixes the true phase; otherwise it is uniform on (-pi, pi].
    """
    thetas = uniform_codebook(n).as_array()
    if phi is None:
        phi_true = wrap_pi(phi_rng.uniform(-math.pi, math.pi, trials))
    else:
        phi_true = np.full(trials, wrap_pi(phi))
    clean = alpha + beta * np.cos(thetas[None, :] + phi_true[:, None])
    values = clean + sigma * noise_rng.standard_normal((trials, n))
    num, den = ml_phase_sums(values, thetas)
    phi_hat = _resolve_with_oracle(np.arctan2(num, den), phi_true)
    return wrap_pi(phi_hat - phi_true)


def _run_point(spec: SweepSpec, n: int, snr: float) -> SweepRow:
    sigma = spec.sigma(snr)
    err = signed_phase_errors(
        n,
        spec.alpha,
        spec.beta,
        sigma,
        spec.trials_per_point,
        point_rng(spec.rng_seed, n, snr, _PHI_STREAM),
        point_rng(spec.rng_seed, n, snr, _NOISE_STREAM),
    )
    abs_err = np.abs(err)
    t = spec.trials_per_point
    mae = float(abs_err.mean())
    stderr = float(abs_err.std(ddof=1) / math.sqrt(t)) if t > 1 else math.nan
    var = float(err.var(ddof=1)) if t > 1 else math.nan
    if sigma > 0:
        bound = mcrlb_phi(uniform_codebook(n), spec.beta, NoiseModel(sigma))
        ratio = var / bound
    else:
        bound = ratio = math.nan
    return SweepRow("uniform", n, snr, mae, bound, var, ratio, t, stderr)


def sweep_mae(spec: SweepSpec) -> SweepResult:
    """MAE of the resolved ML estimate for every (n, snr) in the spec."""
    return SweepResult(tuple(_run_point(spec, n, s) for n in spec.n_values for s in spec.snr_values))


def variance_vs_bound(spec: SweepSpec) -> SweepResult:
    """Sample variance of the estimate against the MCRLB at each point.

    The bound is asymptotic for this nonlinear estimator; use high SNR.
    ``var_ratio`` is NaN where sigma is 0.
    """
    return sweep_mae(spec)


def var_ratio_stderr(row: SweepRow) -> float:
    """Standard error of ``var_ratio`` assuming near-Gaussian errors."""
    return row.var_ratio * math.sqrt(2.0 / (row.trials - 1))


def random_codebooks(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * math.pi, (count, n))


def sweep_mcrlb(
    n_values: Iterable[int],
    random_codebooks_per_n: int,
    rng_seed: int = 0,
    beta: float = 1.0,
    sigma: float = 1.0,
) -> SweepResult:
    """MCRLB of the uniform design and mean MCRLB of random designs per n.

    Random rows average only finite values; ``trials`` counts them.
    """
    if random_codebooks_per_n < 1:
        raise DomainError("random_codebooks_per_n must be >= 1")
    snr = beta**2 / sigma**2
    rows = []
    for n in n_values:
        uni = mcrlb_phi(uniform_codebook(n), beta, NoiseModel(sigma))
        rows.append(SweepRow("uniform", n, snr, math.nan, uni, math.nan, math.nan, 1, 0.0))
        rng = point_rng(rng_seed, n, snr, _CODEBOOK_STREAM)
        vals = mcrlb_batch(random_codebooks(n, random_codebooks_per_n, rng), beta, sigma)
        vals = vals[np.isfinite(vals)]
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
        rows.append(SweepRow("random", n, snr, math.nan, float(vals.mean()), math.nan, math.nan, len(vals), se))
    return SweepResult(tuple(rows))


def median_abs_error(
    n: int, phi: float, alpha: float, beta: float, sigma: float, trials: int, seed: int
) -> float:
    noise_rng = np.random.default_rng(np.random.SeedSequence([seed, n, _NOISE_STREAM]))
    err = signed_phase_errors(n, alpha, beta, sigma, trials, None, noise_rng, phi=phi)
    return float(np.median(np.abs(err)))


def fit_noise_to_median_error(
    target: float,
    n: int,
    phi: float,
    alpha: float,
    beta: float,
    trials: int,
    seed: int,
    sigma_bounds: tuple[float, float],
) -> float:
    """Noise level whose median absolute error at ``n`` equals ``target``.

    Uses common random numbers, so the median is monotone in sigma over the
    small-error range and a bracketing root finder applies.
    """

    def gap(sigma: float) -> float:
        return median_abs_error(n, phi, alpha, beta, sigma, trials, seed) - target

    lo, hi = sigma_bounds
    if gap(lo) > 0 or gap(hi) < 0:
        raise DomainError(f"target median error {target} is not bracketed by sigma in {sigma_bounds}")
    return optimize.brentq(gap, lo, hi, xtol=1e-10 * max(hi, 1.0))
