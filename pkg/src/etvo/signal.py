"""Uniformly sampled signals, synthetic motion, noise injection and trace files."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TraceFormatError",
    "UniformSeries",
    "MotionSpec",
    "gen_motion",
    "add_awgn",
    "rmse",
    "read_trace",
    "write_trace",
    "format_trace",
    "parse_trace",
]

TRACE_HEADER = ("t_seconds", "value")
UNIFORMITY_RTOL = 1e-9


class TraceFormatError(ValueError):
    """A trace file does not follow the `t_seconds,value` uniform layout."""


@dataclass(frozen=True, eq=False)
class UniformSeries:
    """Scalar samples taken every ``dt`` seconds starting at ``t0``.

    ``meta`` carries producer annotations (e.g. reconstruction warm-up) and
    takes no part in equality.
    """

    t0: float
    dt: float
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not math.isfinite(self.t0):
            raise ValueError("t0 must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, UniformSeries):
            return NotImplemented
        return (
            self.t0 == other.t0
            and self.dt == other.dt
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) * self.dt

    @property
    def t_end(self) -> float:
        """Timestamp of the last sample."""
        return self.t0 + (self.values.size - 1) * self.dt

    def with_values(self, values) -> "UniformSeries":
        return UniformSeries(self.t0, self.dt, values)

    def slice(self, start: int, stop: int) -> "UniformSeries":
        if not 0 <= start < stop <= len(self):
            raise IndexError(f"slice [{start}, {stop}) outside series of length {len(self)}")
        return UniformSeries(self.t0 + start * self.dt, self.dt, self.values[start:stop])

    def index_of(self, t: float, tol: float = 1e-6) -> int:
        """Index of the sample at time ``t``; ``t`` must sit on the sample grid."""
        k = (t - self.t0) / self.dt
        r = round(k)
        if abs(k - r) > tol:
            raise ValueError(f"t={t} is not on the sample grid of this series")
        return int(r)


@dataclass(frozen=True)
class MotionSpec:
    """Sum of sinusoids with optional quiet intervals.

    components are ``(amplitude, frequency_hz, phase_rad)``. Inside a quiet
    interval the motion freezes; afterwards it resumes from where it stopped,
    so the trace stays continuous.
    """

    duration: float
    f_s: float
    components: tuple[tuple[float, float, float], ...] = ()
    quiet_intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(tuple(map(float, c)) for c in self.components))
        object.__setattr__(self, "quiet_intervals", tuple(tuple(map(float, q)) for q in self.quiet_intervals))

    def validate(self) -> None:
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be positive, got {self.duration}")
        if not (math.isfinite(self.f_s) and self.f_s > 0):
            raise ValueError(f"f_s must be positive, got {self.f_s}")
        for c in self.components:
            if len(c) != 3 or not all(math.isfinite(v) for v in c):
                raise ValueError(f"component {c} must be three finite numbers")
        prev_end = -math.inf
        for start, end in sorted(self.quiet_intervals):
            if not (0 <= start <= end <= self.duration):
                raise ValueError(f"quiet interval ({start}, {end}) outside [0, {self.duration}]")
            if start < prev_end:
                raise ValueError("quiet intervals overlap")
            prev_end = end


def _motion_time(t: np.ndarray, quiet: Sequence[tuple[float, float]]) -> np.ndarray:
    # Clock that stops inside quiet intervals.
    tau = t.copy()
    for start, end in quiet:
        tau -= np.clip(t - start, 0.0, end - start)
    return tau


def gen_motion(spec: MotionSpec, seed: int = 0) -> UniformSeries:
    """Sample the motion described by ``spec``.

    The sinusoidal model has no random part; ``seed`` is accepted so that
    every trace generator shares one call signature.
    """
    spec.validate()
    n = int(round(spec.duration * spec.f_s))
    if n < 1:
        raise ValueError("duration * f_s rounds to zero samples")
    k = np.arange(n)
    t = k / spec.f_s
    quiet = sorted(spec.quiet_intervals)
    tau = _motion_time(t, quiet)
    values = np.zeros(n)
    for amp, freq, phase in spec.components:
        values += amp * np.sin(2 * np.pi * freq * tau + phase)
    # Bit-exact hold: every in-interval sample copies the first one.
    for start, end in quiet:
        inside = np.flatnonzero((t >= start) & (t <= end))
        if inside.size:
            values[inside] = values[inside[0]]
    return UniformSeries(0.0, 1.0 / spec.f_s, values)


def add_awgn(s: UniformSeries, snr_db: float, seed: int) -> UniformSeries:
    """Add white Gaussian noise at ``snr_db`` relative to the full-trace power."""
    if math.isinf(snr_db) and snr_db > 0:
        return s
    power = float(np.mean(s.values**2))
    if power <= 0:
        raise ValueError("cannot set an SNR on a zero-power signal")
    variance = power / 10 ** (snr_db / 10)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(variance), size=len(s))
    return s.with_values(s.values + noise)


def _check_compatible(a: UniformSeries, b: UniformSeries) -> None:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not math.isclose(a.dt, b.dt, rel_tol=UNIFORMITY_RTOL):
        raise ValueError(f"sampling period mismatch: {a.dt} vs {b.dt}")
    if abs(a.t0 - b.t0) > 1e-6 * a.dt:
        raise ValueError(f"start times differ: {a.t0} vs {b.t0}")


def rmse(a: UniformSeries, b: UniformSeries) -> float:
    _check_compatible(a, b)
    return math.sqrt(float(np.mean((a.values - b.values) ** 2)))


def format_trace(s: UniformSeries) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, v in zip(s.times.tolist(), s.values.tolist()):
        buf.write(f"{t!r},{v!r}\n")
    return buf.getvalue()


def parse_trace(text: str, dt: float | None = None) -> UniformSeries:
    """Parse ``t_seconds,value`` rows into a series, checking the time grid.

    ``dt`` is required only for single-row traces.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if not rows or tuple(c.strip() for c in rows[0]) != TRACE_HEADER:
        raise TraceFormatError(f"expected header {','.join(TRACE_HEADER)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise TraceFormatError(f"non-numeric field: {exc}") from None
    if data.size == 0:
        raise TraceFormatError("trace has no samples")
    if data.ndim != 2 or data.shape[1] != 2:
        raise TraceFormatError("every row must have exactly two fields")
    t, v = data[:, 0], data[:, 1]
    if not np.all(np.isfinite(data)):
        raise TraceFormatError("trace contains non-finite values")
    if t.size == 1:
        if dt is None:
            raise TraceFormatError("single-sample trace needs an explicit dt")
    else:
        step = (t[-1] - t[0]) / (t.size - 1)
        if dt is None:
            dt = step
        if step <= 0:
            raise TraceFormatError("timestamps must increase")
        grid = t[0] + np.arange(t.size) * dt
        worst = float(np.max(np.abs(t - grid)))
        if worst > UNIFORMITY_RTOL * dt:
            raise TraceFormatError(f"timestamps deviate from a uniform grid by {worst:g} s")
    return UniformSeries(float(t[0]), float(dt), v)


def write_trace(path: str | Path, s: UniformSeries) -> None:
    Path(path).write_text(format_trace(s))


def read_trace(path: str | Path, dt: float | None = None) -> UniformSeries:
    return parse_trace(Path(path).read_text(), dt=dt)
