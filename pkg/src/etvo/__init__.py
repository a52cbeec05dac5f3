"""Time- and value-offset measurement for teleoperation sessions."""

__version__ = "0.1.0"

from .channel import (  # noqa: E402
    ChannelProfile,
    GilbertElliott,
    GilbertElliottLoss,
    PacketTrace,
    ReconstructionMode,
    UniformLoss,
    deadband_filter,
    ge_step,
    reconstruct,
    simulate_channel,
)
from .dtw import DtwResult, dtw_align, warp_to_delay  # noqa: E402
from .engine import (  # noqa: E402
    AlignmentResult,
    EtvoParams,
    backtrack,
    compute_evo,
    delta,
    forward_pass,
    run_etvo,
)
from .metrics import (  # noqa: E402
    SessionMetrics,
    e_etvo,
    ge_steady_state,
    packets_per_second,
    t_etvo,
    theoretical_update_duration,
)
from .signal import MotionSpec, UniformSeries, add_awgn, gen_motion, rmse  # noqa: E402

__all__ = [
    "AlignmentResult",
    "ChannelProfile",
    "DtwResult",
    "EtvoParams",
    "GilbertElliott",
    "GilbertElliottLoss",
    "MotionSpec",
    "PacketTrace",
    "ReconstructionMode",
    "SessionMetrics",
    "UniformLoss",
    "UniformSeries",
    "add_awgn",
    "backtrack",
    "compute_evo",
    "deadband_filter",
    "delta",
    "dtw_align",
    "e_etvo",
    "forward_pass",
    "ge_steady_state",
    "ge_step",
    "gen_motion",
    "packets_per_second",
    "reconstruct",
    "rmse",
    "run_etvo",
    "simulate_channel",
    "t_etvo",
    "theoretical_update_duration",
    "warp_to_delay",
]
