"""Seeded network emulation: delay, jitter, loss, deadband and receiver reconstruction."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from .signal import TraceFormatError, UniformSeries

__all__ = [
    "GOOD",
    "BAD",
    "GilbertElliott",
    "UniformLoss",
    "GilbertElliottLoss",
    "ChannelProfile",
    "PacketTrace",
    "ReconstructionMode",
    "ge_step",
    "ge_loss_mask",
    "deadband_filter",
    "simulate_channel",
    "reconstruct",
    "format_packets",
    "parse_packets",
    "write_packets",
    "read_packets",
]

GOOD, BAD = "good", "bad"

# Arrival/tick comparisons absorb float error from summing send time and delay.
TIME_EPS = 1e-9

PACKET_HEADER = ("send_s", "arrival_s", "position", "velocity")


@dataclass(frozen=True)
class GilbertElliott:
    """Two-state loss chain parameterised by average loss ``pi_b`` and burstiness ``x``.

    ``p = x * pi_b`` (good to bad) and ``r = x * (1 - pi_b)`` (bad to good), so
    the long-run loss ``p / (p + r)`` is ``pi_b`` for every ``x``; ``x = 1`` is
    memoryless.
    """

    pi_b: float
    x: float = 1.0
    state: str = GOOD

    def __post_init__(self):
        if not (0.0 <= self.pi_b < 1.0):
            raise ValueError(f"pi_b must lie in [0, 1), got {self.pi_b}")
        if not (0.0 < self.x <= 1.0):
            raise ValueError(f"x must lie in (0, 1], got {self.x}")
        if self.state not in (GOOD, BAD):
            raise ValueError(f"state must be {GOOD!r} or {BAD!r}")

    @classmethod
    def from_rates(cls, p: float, r: float, state: str = GOOD) -> "GilbertElliott":
        """Build from transition probabilities; requires ``0 < p + r <= 1``."""
        if p < 0 or r <= 0 or p + r > 1:
            raise ValueError(f"need p >= 0, r > 0 and p + r <= 1, got p={p}, r={r}")
        return cls(pi_b=p / (p + r), x=p + r, state=state)

    @property
    def p(self) -> float:
        return self.x * self.pi_b

    @property
    def r(self) -> float:
        return self.x * (1.0 - self.pi_b)


def ge_step(ge: GilbertElliott, rng: np.random.Generator) -> tuple[bool, GilbertElliott]:
    """Advance one slot; the packet is lost iff the chain lands in the bad state."""
    u = rng.random()
    if ge.state == GOOD:
        nxt = BAD if u < ge.p else GOOD
    else:
        nxt = GOOD if u < ge.r else BAD
    return nxt == BAD, replace(ge, state=nxt)


def ge_loss_mask(ge: GilbertElliott, n: int, rng: np.random.Generator) -> tuple[np.ndarray, GilbertElliott]:
    """``n`` consecutive :func:`ge_step` outcomes, drawing the same random stream."""
    u = rng.random(n)
    p, r = ge.p, ge.r
    bad = ge.state == BAD
    lost = np.empty(n, dtype=bool)
    for k, uk in enumerate(u.tolist()):
        if bad:
            bad = not uk < r
        else:
            bad = uk < p
        lost[k] = bad
    return lost, replace(ge, state=BAD if bad else GOOD)


@dataclass(frozen=True)
class UniformLoss:
    q: float

    def __post_init__(self):
        if not (0.0 <= self.q < 1.0):
            raise ValueError(f"uniform loss q must lie in [0, 1), got {self.q}")


@dataclass(frozen=True)
class GilbertElliottLoss:
    pi_b: float
    x: float

    def __post_init__(self):
        GilbertElliott(self.pi_b, self.x)

    def chain(self) -> GilbertElliott:
        return GilbertElliott(self.pi_b, self.x)


LossModel = Union[None, UniformLoss, GilbertElliottLoss]


@dataclass(frozen=True)
class ChannelProfile:
    base_delay: float = 0.0
    jitter_std: float = 0.0
    loss: LossModel = None
    deadband: float | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("base_delay", "jitter_std"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.deadband is not None and not (0.0 <= self.deadband < 1.0):
            raise ValueError(f"deadband must lie in [0, 1), got {self.deadband}")
        if self.loss is not None and not isinstance(self.loss, (UniformLoss, GilbertElliottLoss)):
            raise ValueError(f"unknown loss model {self.loss!r}")


@dataclass(frozen=True, eq=False)
class PacketTrace:
    """Delivered packets in send order; ``n_sent`` also counts the lost ones."""

    send: np.ndarray
    arrival: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    n_sent: int

    def __len__(self) -> int:
        return self.send.size

    def __post_init__(self):
        n = self.send.size
        for name in ("arrival", "position", "velocity"):
            if getattr(self, name).size != n:
                raise ValueError("packet columns must have equal length")
        if n > 1 and np.any(np.diff(self.send) <= 0):
            raise ValueError("send times must be strictly increasing")

    @classmethod
    def empty(cls) -> "PacketTrace":
        z = np.zeros(0)
        return cls(z, z, z, z, 0)


class ReconstructionMode(str, Enum):
    ZERO_ORDER_HOLD = "zero_order_hold"
    LINEAR_EXTRAPOLATION = "linear_extrapolation"


def deadband_filter(s: UniformSeries, k: float) -> list[tuple[int, float]]:
    """Indices and values a relative-threshold deadband encoder would transmit."""
    if not (0.0 <= k < 1.0):
        raise ValueError(f"deadband threshold must lie in [0, 1), got {k}")
    values = s.values.tolist()
    last = values[0]
    out = [(0, last)]
    for i in range(1, len(values)):
        v = values[i]
        if abs(v - last) > k * abs(last):
            out.append((i, v))
            last = v
    return out


def simulate_channel(s: UniformSeries, profile: ChannelProfile) -> PacketTrace:
    """Send each (deadband-kept) sample as a packet through the impaired link."""
    if profile.deadband is not None:
        kept = deadband_filter(s, profile.deadband)
        idx = np.array([i for i, _ in kept], dtype=np.int64)
    else:
        idx = np.arange(len(s))
    send = s.t0 + idx * s.dt
    position = s.values[idx]
    velocity = np.zeros(idx.size)
    if idx.size > 1:
        velocity[1:] = np.diff(position) / np.diff(send)

    jitter_seq, loss_seq = np.random.SeedSequence(profile.seed).spawn(2)
    arrival = send + profile.base_delay
    if profile.jitter_std > 0:
        jitter = np.random.default_rng(jitter_seq).normal(0.0, profile.jitter_std, idx.size)
        arrival = arrival + np.maximum(jitter, 0.0)

    loss_rng = np.random.default_rng(loss_seq)
    if profile.loss is None:
        delivered = np.ones(idx.size, dtype=bool)
    elif isinstance(profile.loss, UniformLoss):
        delivered = loss_rng.random(idx.size) >= profile.loss.q
    else:
        lost, _ = ge_loss_mask(profile.loss.chain(), idx.size, loss_rng)
        delivered = ~lost
    return PacketTrace(
        send[delivered], arrival[delivered], position[delivered], velocity[delivered], int(idx.size)
    )


def reconstruct(
    trace: PacketTrace,
    f_out: float,
    t_end: float,
    mode: ReconstructionMode | str = ReconstructionMode.ZERO_ORDER_HOLD,
    t_start: float = 0.0,
) -> UniformSeries:
    """Receiver output at ticks ``t_start + n / f_out`` up to ``t_end``.

    Each tick uses the delivered packet with the newest send time among those
    already arrived. Ticks before the first arrival output 0; their count is
    stored in ``meta["warmup_samples"]``.
    """
    if not (math.isfinite(f_out) and f_out > 0):
        raise ValueError(f"f_out must be positive, got {f_out}")
    mode = ReconstructionMode(mode)
    n_ticks = int(math.floor((t_end - t_start) * f_out + TIME_EPS)) + 1
    if n_ticks < 1:
        raise ValueError("t_end precedes t_start")
    ticks = t_start + np.arange(n_ticks) / f_out
    out = np.zeros(n_ticks)
    if len(trace) == 0:
        return UniformSeries(t_start, 1.0 / f_out, out, meta={"warmup_samples": n_ticks, "empty_trace": True})

    order = np.argsort(trace.arrival, kind="stable")
    arr_sorted = trace.arrival[order]
    # Newest-sent packet among the first n arrivals; send order == index order.
    newest = np.maximum.accumulate(order)
    seen = np.searchsorted(arr_sorted, ticks + TIME_EPS, side="right")
    have = seen > 0
    pkt = newest[np.maximum(seen - 1, 0)]
    held = trace.position[pkt]
    if mode is ReconstructionMode.LINEAR_EXTRAPOLATION:
        held = held + trace.velocity[pkt] * (ticks - trace.send[pkt])
    out[have] = held[have]
    warmup = int(np.count_nonzero(~have))
    return UniformSeries(t_start, 1.0 / f_out, out, meta={"warmup_samples": warmup, "empty_trace": False})


def format_packets(trace: PacketTrace) -> str:
    buf = io.StringIO()
    buf.write(",".join(PACKET_HEADER) + "\n")
    for row in zip(trace.send, trace.arrival, trace.position, trace.velocity):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def parse_packets(text: str, n_sent: int | None = None) -> PacketTrace:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or tuple(c.strip() for c in rows[0]) != PACKET_HEADER:
        raise TraceFormatError(f"expected header {','.join(PACKET_HEADER)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, 4)
    except ValueError as exc:
        raise TraceFormatError(f"malformed packet row: {exc}") from None
    try:
        return PacketTrace(
            data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), data[:, 3].copy(),
            len(data) if n_sent is None else n_sent,
        )
    except ValueError as exc:
        raise TraceFormatError(str(exc)) from None


def write_packets(path: str | Path, trace: PacketTrace) -> None:
    Path(path).write_text(format_packets(trace))


def read_packets(path: str | Path) -> PacketTrace:
    return parse_packets(Path(path).read_text())
