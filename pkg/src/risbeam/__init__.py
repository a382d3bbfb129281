"""RIS-assisted multi-user MIMO downlink: SER analysis and beamforming design.

The package provides block-fading channel generators, square-QAM modulation
with minimum-distance detection, closed-form and Monte Carlo symbol error
rates, linear precoders, and an improved differential-evolution search
(success-history parameter adaptation plus local refinement) that jointly
optimizes surface phase shifts and beamforming vectors to minimize the
average SER.
"""

__version__ = "0.1.0"

from .channel import (
    AggregatedChannel,
    Betas,
    ChannelRealization,
    PhaseVector,
    RicianConfig,
    SystemDims,
    aggregate,
    corrupt_csi,
    gen_rayleigh,
    gen_rician,
)
from .modem import Constellation, SubsetLabel, build_constellation, detect, map_bits, unmap_bits
from .linkmath import (
    MRT,
    RZF,
    ZF,
    BeamformerSet,
    LinkBudget,
    fitness_alt,
    fitness_avg_ser,
    precode,
    ser_analytic,
    ser_linear,
    ser_series_high,
    ser_series_low,
    sinr,
    sinr_all,
)
from .encode import decode, individual_length, random_individual, wrap_phase_entry, clamp_beam_entry
from .simulate import SerReport, run_downlink
from .de_opt import (
    JOINT,
    PASSIVE_ONLY,
    Evaluator,
    OptimizerConfig,
    OptimizeResult,
    SerProblem,
    optimize,
)
from .baselines import BaselineConfig, BaselineResult, run_baseline

__all__ = [
    "AggregatedChannel",
    "BaselineConfig",
    "BaselineResult",
    "BeamformerSet",
    "Betas",
    "ChannelRealization",
    "Constellation",
    "Evaluator",
    "JOINT",
    "LinkBudget",
    "MRT",
    "OptimizeResult",
    "OptimizerConfig",
    "PASSIVE_ONLY",
    "PhaseVector",
    "RicianConfig",
    "RZF",
    "SerProblem",
    "SerReport",
    "SubsetLabel",
    "SystemDims",
    "ZF",
    "aggregate",
    "build_constellation",
    "clamp_beam_entry",
    "corrupt_csi",
    "decode",
    "detect",
    "fitness_alt",
    "fitness_avg_ser",
    "gen_rayleigh",
    "gen_rician",
    "individual_length",
    "map_bits",
    "optimize",
    "precode",
    "random_individual",
    "run_baseline",
    "run_downlink",
    "ser_analytic",
    "ser_linear",
    "ser_series_high",
    "ser_series_low",
    "sinr",
    "sinr_all",
    "unmap_bits",
    "wrap_phase_entry",
]
