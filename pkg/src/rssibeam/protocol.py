"""Training -> ambiguity resolution -> power beamforming session simulator.

One session is strictly sequential: the ET steps through the uniform
codebook while the ER feeds back each RSSI, the ET estimates the phase
difference, asks for two probe readings to settle the pi ambiguity, then
holds the resulting beamforming vector for the whole WPB stage.  The
channel is frozen for the session (block fading).  The feedback link is
lossless and instantaneous.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from rssibeam.codebook import uniform_codebook
from rssibeam.errors import DomainError, IndeterminatePhase, UndefinedGain
from rssibeam.estimator import PhaseEstimate, RssiVector, ml_phase, resolve_ambiguity, wpb_vector
from rssibeam.model import (
    ChannelPair,
    HarvestModel,
    NoiseModel,
    ParamVector,
    derive_params,
    harvested_energy,
    rssi_mean,
    sample_rssi,
    wrap_2pi,
    wrap_pi,
)

# Active-mode ER cost of 12.8 uJ/ms, charged for a 1 ms wake-up per feedback.
DEFAULT_FEEDBACK_COST = 12.8e-6
DEFAULT_SLOT_DURATION = 0.5
WPB_TO_TRAINING_RATIO = 10


@dataclass(frozen=True)
class RayleighChannel:
    """Independent CN(0, scale^2) gains on both antennas."""

    scale: float = 1.0

    def draw(self, rng: np.random.Generator) -> ChannelPair:
        h = self.scale * (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / math.sqrt(2.0)
        return ChannelPair.from_complex(h[0], h[1])


@dataclass(frozen=True)
class RicianChannel:
    """Line-of-sight plus scattered gains; LOS phases are uniform per antenna."""

    k_factor: float
    scale: float = 1.0

    def __post_init__(self):
        if self.k_factor < 0:
            raise DomainError(f"Rician K factor must be >= 0, got {self.k_factor}")

    def draw(self, rng: np.random.Generator) -> ChannelPair:
        k = self.k_factor
        los = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, 2))
        nlos = (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / math.sqrt(2.0)
        h = self.scale * (math.sqrt(k / (k + 1.0)) * los + math.sqrt(1.0 / (k + 1.0)) * nlos)
        return ChannelPair.from_complex(h[0], h[1])


ChannelSpec = Union[ChannelPair, RayleighChannel, RicianChannel]


def draw_channel(spec: ChannelSpec, rng: np.random.Generator) -> ChannelPair:
    if isinstance(spec, ChannelPair):
        return spec
    return spec.draw(rng)


class Stage(str, enum.Enum):
    TRAINING = "training"
    AMBIGUITY = "ambiguity"
    WPB = "wpb"


class Baseline(str, enum.Enum):
    SINGLE_ANTENNA = "single_antenna"
    RANDOM_PHASE_AVG = "random_phase_avg"


@dataclass(frozen=True)
class SessionConfig:
    n_training: int = 3
    wpb_slots: int | None = None
    slot_duration: float = DEFAULT_SLOT_DURATION
    noise: NoiseModel = field(default_factory=lambda: NoiseModel(0.0))
    harvest: HarvestModel = field(default_factory=HarvestModel)
    channel: ChannelSpec = field(default_factory=lambda: ChannelPair(1.0, 0.0, 1.0, 0.0))
    feedback_cost_per_slot: float = DEFAULT_FEEDBACK_COST
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_training < 3:
            raise DomainError(f"n_training must be >= 3, got {self.n_training}")
        if self.wpb_slots is None:
            object.__setattr__(self, "wpb_slots", WPB_TO_TRAINING_RATIO * self.n_training)
        if self.wpb_slots < 0:
            raise DomainError(f"wpb_slots must be >= 0, got {self.wpb_slots}")
        if self.slot_duration < 0:
            raise DomainError(f"slot_duration must be >= 0, got {self.slot_duration}")
        if self.feedback_cost_per_slot < 0:
            raise DomainError("feedback_cost_per_slot must be >= 0")


@dataclass(frozen=True)
class SlotRecord:
    slot: int
    stage: Stage
    theta: float
    true_rssi: float
    observed_rssi: float
    feedback: bool
    energy_balance: float


@dataclass(frozen=True)
class SessionLog:
    config: SessionConfig
    channel: ChannelPair
    params: ParamVector
    records: tuple[SlotRecord, ...]
    estimate: PhaseEstimate | None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def stage(self, stage: Stage | str) -> tuple[SlotRecord, ...]:
        stage = Stage(stage)
        return tuple(r for r in self.records if r.stage is stage)

    @property
    def feedback_count(self) -> int:
        return sum(r.feedback for r in self.records)

    @property
    def wpb_theta(self) -> float | None:
        wpb = self.stage(Stage.WPB)
        return wpb[0].theta if wpb else None

    def wpb_mean_rssi(self) -> float:
        wpb = self.stage(Stage.WPB)
        if not wpb:
            raise DomainError("session has no WPB slots")
        return float(np.mean([r.true_rssi for r in wpb]))

    def phase_error(self) -> float | None:
        if self.estimate is None:
            return None
        return abs(wrap_pi(self.estimate.phi_hat - self.params.phi))

    def to_lines(self) -> list[str]:
        """Line-oriented dump: one ``key=value`` record per line."""
        p = self.params
        lines = [
            f"session seed={self.config.rng_seed} n_training={self.config.n_training} "
            f"wpb_slots={self.config.wpb_slots} alpha={p.alpha!r} beta={p.beta!r} phi={p.phi!r}"
        ]
        for r in self.records:
            lines.append(
                f"slot index={r.slot} stage={r.stage.value} theta={r.theta!r} "
                f"true_rssi={r.true_rssi!r} observed_rssi={r.observed_rssi!r} "
                f"feedback={int(r.feedback)} energy_balance={r.energy_balance!r}"
            )
        if self.estimate is not None:
            e = self.estimate
            lines.append(
                f"estimate phi_hat={e.phi_hat!r} resolved={int(e.ambiguity_resolved)} "
                f"candidates={e.candidates[0]!r},{e.candidates[1]!r}"
            )
        if self.failure is not None:
            lines.append(f"failure reason={self.failure!r}")
        return lines


class _Recorder:
    def __init__(self, cfg: SessionConfig):
        self.cfg = cfg
        self.records: list[SlotRecord] = []
        self.balance = 0.0

    def add(self, stage: Stage, theta: float, true_rssi: float, observed: float, feedback: bool):
        self.balance += harvested_energy(true_rssi, self.cfg.harvest, self.cfg.slot_duration)
        if feedback:
            self.balance -= self.cfg.feedback_cost_per_slot
        self.records.append(
            SlotRecord(len(self.records), stage, wrap_2pi(theta), true_rssi, observed, feedback, self.balance)
        )


def run_session(cfg: SessionConfig) -> SessionLog:
    """Simulate one full session; deterministic given ``cfg.rng_seed``.

    A flat channel (beta ~ 0) aborts after training with ``failure`` set.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    channel = draw_channel(cfg.channel, rng)
    params = derive_params(channel)
    rec = _Recorder(cfg)

    def transmit(stage: Stage, theta: float, feedback: bool) -> float:
        obs = sample_rssi(params, theta, cfg.noise, rng)
        rec.add(stage, theta, rssi_mean(params, theta), obs.value, feedback)
        return obs.value

    cb = uniform_codebook(cfg.n_training)
    values = [transmit(Stage.TRAINING, theta, True) for theta in cb]
    try:
        estimate = ml_phase(RssiVector.from_arrays(cb.thetas, values), cb)
    except IndeterminatePhase as exc:
        return SessionLog(cfg, channel, params, tuple(rec.records), None, failure=str(exc))

    estimate = resolve_ambiguity(estimate, lambda theta: transmit(Stage.AMBIGUITY, theta, True))
    q = wpb_vector(estimate)
    for _ in range(cfg.wpb_slots):
        transmit(Stage.WPB, q.theta, False)
    return SessionLog(cfg, channel, params, tuple(rec.records), estimate)


def beamforming_gain(log: SessionLog, baseline: Baseline | str) -> float:
    """Mean true WPB-stage RSSI relative to a reference transmission.

    ``single_antenna`` compares against antenna 1 alone (power ``|h1|^2``);
    ``random_phase_avg`` against the phase-averaged RSSI ``alpha``.
    """
    baseline = Baseline(baseline)
    if not log.stage(Stage.WPB):
        raise DomainError("beamforming gain needs at least one WPB slot")
    if baseline is Baseline.SINGLE_ANTENNA:
        ref = log.channel.mag1**2
    else:
        ref = log.params.alpha
    if ref <= 0:
        raise UndefinedGain(f"{baseline.value} baseline power is zero")
    return log.wpb_mean_rssi() / ref


def range_extension(gain: float, path_loss_exponent: float = 2.0) -> float:
    """Fractional distance increase at equal delivered power, ``gain**(1/n) - 1``."""
    if not gain > 0:
        raise DomainError(f"gain must be > 0, got {gain}")
    return gain ** (1.0 / path_loss_exponent) - 1.0


class EnergyLedger(NamedTuple):
    harvested: float
    spent_on_feedback: float
    net: float


def er_energy_ledger(log: SessionLog) -> EnergyLedger:
    cfg = log.config
    harvested = sum(harvested_energy(r.true_rssi, cfg.harvest, cfg.slot_duration) for r in log.records)
    spent = cfg.feedback_cost_per_slot * log.feedback_count
    return EnergyLedger(harvested, spent, harvested - spent)


def session_summary(log: SessionLog, path_loss_exponent: float = 2.0) -> dict:
    """Plain-dict digest of a session for JSON output."""
    p = log.params
    out = {
        "ok": log.ok,
        "failure": log.failure,
        "seed": log.config.rng_seed,
        "n_training": log.config.n_training,
        "wpb_slots": log.config.wpb_slots,
        "feedback_messages": log.feedback_count,
        "alpha": p.alpha,
        "beta": p.beta,
        "phi_rad": p.phi,
        "phi_deg": math.degrees(p.phi),
        "optimal_rssi": p.peak,
    }
    if log.estimate is not None:
        e = log.estimate
        out.update(
            phi_hat_rad=e.phi_hat,
            phi_hat_deg=math.degrees(e.phi_hat),
            candidates_rad=list(e.candidates),
            abs_error_deg=math.degrees(log.phase_error()),
            wpb_theta_rad=log.wpb_theta,
            wpb_theta_deg=None if log.wpb_theta is None else math.degrees(log.wpb_theta),
        )
    if log.stage(Stage.WPB):
        out["wpb_mean_rssi"] = log.wpb_mean_rssi()
        gains = {}
        for b in Baseline:
            try:
                g = beamforming_gain(log, b)
                gains[b.value] = {"gain": g, "range_extension": range_extension(g, path_loss_exponent)}
            except UndefinedGain:
                gains[b.value] = {"gain": None, "range_extension": None}
        out["gains"] = gains
    ledger = er_energy_ledger(log)
    out["energy"] = ledger._asdict()
    return out


def theta_sweep(cfg: SessionConfig, step: float) -> list[tuple[float, float, float]]:
    """RSSI over a full turn of the beamforming phase at spacing ``step``.

    Returns ``(theta, true_rssi, observed_rssi)`` triples starting at 0.
    """
    m = round(2.0 * math.pi / step)
    if m < 1 or abs(m * step - 2.0 * math.pi) > 1e-9:
        raise DomainError(f"sweep step {step} does not divide a full turn")
    rng = np.random.default_rng(cfg.rng_seed)
    params = derive_params(draw_channel(cfg.channel, rng))
    rows = []
    for k in range(m):
        theta = k * step
        obs = sample_rssi(params, theta, cfg.noise, rng)
        rows.append((theta, rssi_mean(params, theta), obs.value))
    return rows
