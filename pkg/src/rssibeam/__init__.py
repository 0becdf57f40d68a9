"""Energy beamforming for a two-antenna transmitter driven only by RSSI feedback."""

from rssibeam.codebook import (
    Codebook,
    brute_force_optimal_codebook,
    crlb_phi,
    delta_ijk,
    fim,
    mcrlb_phi,
    uniform_codebook,
)
from rssibeam.errors import (
    CodebookMismatch,
    ContractError,
    DomainError,
    IndeterminatePhase,
    InvalidCodebookSize,
    NumericDegeneracy,
    UnboundedCRLB,
    UndefinedGain,
)
from rssibeam.estimator import (
    PhaseEstimate,
    RssiVector,
    ml_oracle_grid,
    ml_phase,
    noiseless_phase,
    residual_cost,
    resolve_ambiguity,
    wpb_vector,
)
from rssibeam.model import (
    BeamformingVector,
    ChannelPair,
    HarvestModel,
    NoiseModel,
    ParamVector,
    RssiObservation,
    baseband_power,
    derive_params,
    harvested_energy,
    rssi_mean,
    sample_rssi,
)
from rssibeam.protocol import (
    RayleighChannel,
    RicianChannel,
    SessionConfig,
    SessionLog,
    beamforming_gain,
    er_energy_ledger,
    range_extension,
    run_session,
)

__version__ = "0.1.0"
