"""Index-modulation link simulator: PRPP, SM, PRPP-SM, PIM and PIM-SM."""

from .channel import (
    ChannelRealization,
    NoiseSpec,
    add_noise,
    apply_channel,
    draw_channel,
    snr_to_sigma2,
)
from .detect import (
    DetectionResult,
    HypothesisBudgetError,
    decode_result,
    las_detect,
    mmse_estimate,
    ml_detect,
)
from .harness import BerCurve, BerPoint, StopRule, gap_at_ber, run_point, run_sweep
from .modem import Alphabet, Scheme, SchemeConfig, demap_symbols, make_alphabet, map_bits, spectral_efficiency
from .numerics import SplitMix64
from .schemes import (
    ActivationPattern,
    PhasePrecoder,
    PrecoderSet,
    TxHypothesis,
    build_materials,
    build_precoder_set,
    build_prpp,
    encode,
    expand_activation,
    select_precoder,
    transmit_signal,
)

__all__ = [
    "ActivationPattern",
    "add_noise",
    "Alphabet",
    "apply_channel",
    "BerCurve",
    "BerPoint",
    "build_materials",
    "build_precoder_set",
    "build_prpp",
    "ChannelRealization",
    "decode_result",
    "demap_symbols",
    "DetectionResult",
    "draw_channel",
    "encode",
    "expand_activation",
    "gap_at_ber",
    "HypothesisBudgetError",
    "las_detect",
    "make_alphabet",
    "map_bits",
    "ml_detect",
    "mmse_estimate",
    "NoiseSpec",
    "PhasePrecoder",
    "PrecoderSet",
    "run_point",
    "run_sweep",
    "Scheme",
    "SchemeConfig",
    "select_precoder",
    "snr_to_sigma2",
    "spectral_efficiency",
    "SplitMix64",
    "StopRule",
    "transmit_signal",
    "TxHypothesis",
]

__version__ = "0.1.0"
