"""Session-level metrics and closed-form update-duration oracles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import (
    ChannelProfile,
    GilbertElliottLoss,
    PacketTrace,
    ReconstructionMode,
    reconstruct,
    simulate_channel,
)
from .engine import AlignmentResult
from .signal import UniformSeries

__all__ = [
    "SessionMetrics",
    "t_etvo",
    "e_etvo",
    "ge_steady_state",
    "steady_state_tail",
    "theoretical_update_duration",
    "packets_per_second",
    "simulated_update_duration",
]


@dataclass(frozen=True)
class SessionMetrics:
    t_etvo: float
    e_etvo: float
    rmse: float
    packets_per_second: float | None = None
    theory_update_s: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def t_etvo(result: AlignmentResult) -> float:
    """Mean effective time offset, in seconds."""
    if len(result.eto) == 0:
        raise ValueError("empty ETO series")
    return float(np.mean(result.eto))


def e_etvo(result: AlignmentResult) -> float:
    """Root of the mean EVO; EVO holds squared residuals, so this is in signal units."""
    if len(result.evo) == 0:
        raise ValueError("empty EVO series")
    return math.sqrt(float(np.mean(result.evo)))


def ge_steady_state(p: float, r: float, n_max: int) -> tuple[float, np.ndarray]:
    """Stationary probabilities of the loss-run chain.

    Returns ``pi_g`` and ``[pi_b1, ..., pi_b{n_max}]`` where ``pi_bn`` is the
    probability that exactly the last ``n`` packets were lost.
    """
    if p == 0 and r == 0:
        raise ValueError("p and r cannot both be zero")
    if not (0 <= p <= 1 and 0 <= r <= 1):
        raise ValueError("p and r must lie in [0, 1]")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    pi_g = r / (p + r)
    n = np.arange(1, n_max + 1)
    pi_b = p * r * (1 - r) ** (n - 1) / (p + r)
    return pi_g, pi_b


def steady_state_tail(p: float, r: float, n_max: int) -> float:
    """Probability mass of runs longer than ``n_max``: ``p(1-r)^n_max / (p+r)``."""
    _, head = ge_steady_state(p, r, n_max)
    if r == 0:
        return p / (p + r) - float(np.sum(head))
    return p * (1 - r) ** n_max / (p + r)


def theoretical_update_duration(f_s: float, p: float, r: float) -> float:
    """Expected age of the newest delivered sample: ``1/(2 f_s) + p / (f_s r (p + r))``."""
    if not f_s > 0:
        raise ValueError("f_s must be positive")
    if p < 0 or r < 0:
        raise ValueError("p and r must be non-negative")
    if p == 0:
        return 1.0 / (2.0 * f_s)
    if r == 0:
        raise ValueError("r = 0 with p > 0 makes the update duration unbounded")
    return 1.0 / (2.0 * f_s) + p / (f_s * r * (p + r))


def packets_per_second(trace: PacketTrace, t_end: float, t_start: float | None = None) -> float:
    """Delivered packets per second.

    Without ``t_start`` every delivered packet counts over ``t_end`` seconds;
    with it, only packets sent in ``[t_start, t_end)``.
    """
    if t_start is None:
        if not t_end > 0:
            raise ValueError("t_end must be positive")
        return len(trace) / t_end
    span = t_end - t_start
    if not span > 0:
        raise ValueError("t_end must follow t_start")
    inside = (trace.send >= t_start - 1e-9) & (trace.send < t_end - 1e-9)
    return int(np.count_nonzero(inside)) / span


def simulated_update_duration(
    f_s: float, pi_b: float, x: float, n_ticks: int, seed: int
) -> float:
    """Monte-Carlo mean age of the held sample at tick midpoints.

    A ramp ``value = t`` is sent through a zero-delay channel with
    Gilbert-Elliott loss and held by the receiver, so ``tick - output`` is the
    age of the held sample.
    """
    ramp = UniformSeries(0.0, 1.0 / f_s, np.arange(n_ticks) / f_s)
    loss = GilbertElliottLoss(pi_b, x) if pi_b > 0 else None
    trace = simulate_channel(ramp, ChannelProfile(loss=loss, seed=seed))
    half = 0.5 / f_s
    held = reconstruct(
        trace, f_s, ramp.t_end + half, ReconstructionMode.ZERO_ORDER_HOLD, t_start=half
    )
    return float(np.mean(held.times - held.values))
