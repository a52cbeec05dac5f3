"""Effective time- and value-offset (ETVO) alignment.

The reconstructed signal ``g`` (length N) is aligned onto the sensed signal
``f`` (length N + M - 1). Cell ``(i, j)`` pairs ``g[i]`` with
``f[i - j + M - 1]``, i.e. offset row ``j`` means a time offset of
``dt_min + j * t``.

A path moves through the grid column by column. Between columns it either
keeps its row (forward) or climbs one row per column along a diagonal run of
``k`` columns. Inside a column it may descend ``k`` rows at once. Each climb or
descent is one adjustment costing ``k * p_prop + p_fixed + p_slack``. Every
visited cell adds its squared error ``delta(i, j)``.

Direction matrix encoding, ``D[j, i]``:

* ``0``   predecessor ``(i - 1, j)``
* ``+k``  predecessor ``(i, j + k)`` (descent inside column ``i``)
* ``-k``  predecessor ``(i - k, j - k)`` (diagonal run)
* ``START`` in column 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .signal import UniformSeries

__all__ = [
    "START",
    "EtvoParams",
    "AlignmentResult",
    "delta",
    "forward_pass",
    "backtrack",
    "compute_evo",
    "adjustments",
    "penalty_of_warp",
    "run_etvo",
    "reference_window",
]

START = np.iinfo(np.int32).min


@dataclass(frozen=True)
class EtvoParams:
    dt_min: float
    m: int
    t: float
    p_prop: float = 0.0
    p_fixed: float = 0.0
    p_slack: float = 0.0

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if not (math.isfinite(self.t) and self.t > 0):
            raise ValueError(f"t must be positive, got {self.t}")
        if not math.isfinite(self.dt_min):
            raise ValueError("dt_min must be finite")
        for name in ("p_prop", "p_fixed", "p_slack"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @property
    def dt_max(self) -> float:
        return self.dt_min + self.m * self.t

    @property
    def penalties(self) -> tuple[float, float, float]:
        return (self.p_prop, self.p_fixed, self.p_slack)


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    warp: np.ndarray
    eto: np.ndarray
    evo: np.ndarray
    path_cost: float
    penalty_cost: float

    @property
    def n_adjustments(self) -> int:
        return adjustments(self.warp)[0]

    @property
    def offset_travel(self) -> int:
        return adjustments(self.warp)[1]


def _values(x) -> np.ndarray:
    if isinstance(x, UniformSeries):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def delta(g, f, i: int, j: int, m: int) -> float:
    """Squared error between ``g[i]`` and the ``f`` sample paired with it at row ``j``."""
    gv, fv = _values(g), _values(f)
    if fv.size != gv.size + m - 1:
        raise ValueError("f must be m - 1 samples longer than g")
    if not (0 <= i < gv.size and 0 <= j < m):
        raise IndexError(f"cell ({i}, {j}) outside {gv.size} x {m} grid")
    return float((gv[i] - fv[i - j + m - 1]) ** 2)


def _check_instance(f, g, params: EtvoParams) -> tuple[np.ndarray, np.ndarray]:
    fv, gv = _values(f), _values(g)
    if gv.size < 1:
        raise ValueError("g must hold at least one sample")
    if fv.size != gv.size + params.m - 1:
        raise ValueError(
            f"len(f)={fv.size} must equal len(g) + m - 1 = {gv.size + params.m - 1}"
        )
    for s in (f, g):
        if isinstance(s, UniformSeries) and not math.isclose(s.dt, params.t, rel_tol=1e-9):
            raise ValueError(f"series period {s.dt} differs from params.t={params.t}")
    return fv, gv


@nb.njit(cache=True)
def _forward_kernel(f, g, m, p_prop, p_fixed, p_slack, start):
    n = g.shape[0]
    off = m - 1
    inf = np.inf
    d = np.empty((m, n), np.int32)
    cost = np.empty(m)
    new = np.empty(m)
    # Best diagonal-run candidate landing on row j of the current column.
    diag = np.full(m, inf)
    diag_k = np.zeros(m, np.int64)
    for j in range(m):
        e = g[0] - f[off - j]
        cost[j] = e * e
        d[j, 0] = start
    for i in range(1, n):
        for j in range(m - 1, 0, -1):
            # Start a run from (i-1, j-1) or extend the run that landed there.
            e = g[i - 1] - f[i - j + off]
            a = cost[j - 1] + p_prop + p_fixed
            b = diag[j - 1] + e * e + p_prop
            if a <= b:
                diag[j] = a
                diag_k[j] = 1
            else:
                diag[j] = b
                diag_k[j] = diag_k[j - 1] + 1
        diag[0] = inf
        diag_k[0] = 0
        down = inf
        down_k = 0
        for j in range(m - 1, -1, -1):
            if j < m - 1:
                e = g[i] - f[i - j - 1 + off]
                a = new[j + 1] + p_prop + p_fixed
                b = down + e * e + p_prop
                if a <= b:
                    down = a
                    down_k = 1
                else:
                    down = b
                    down_k += 1
            best = cost[j]
            code = 0
            if down + p_slack < best:
                best = down + p_slack
                code = down_k
            if diag[j] + p_slack < best:
                best = diag[j] + p_slack
                code = -diag_k[j]
            e = g[i] - f[i - j + off]
            new[j] = e * e + best
            d[j, i] = code
        cost, new = new, cost
    return d, cost.copy()


def forward_pass(f, g, params: EtvoParams) -> tuple[np.ndarray, np.ndarray]:
    """Fill the direction matrix and return it with the last column's costs.

    Runs in O(N * M): the best descent and diagonal candidates are carried as
    running minima instead of scanning every step size.
    """
    fv, gv = _check_instance(f, g, params)
    d, final = _forward_kernel(
        fv, gv, params.m, params.p_prop, params.p_fixed, params.p_slack, START
    )
    return d, final


def backtrack(d: np.ndarray, final_column_costs) -> np.ndarray:
    """Recover the warp ``w`` (terminal row per column) from the direction matrix."""
    d = np.asarray(d)
    final = np.asarray(final_column_costs, dtype=float)
    m, n = d.shape
    if final.shape != (m,):
        raise ValueError("final_column_costs must have one entry per row")
    w = np.empty(n, dtype=np.int64)
    i = n - 1
    j = int(np.argmin(final))
    w[i] = j
    while i > 0:
        code = int(d[j, i])
        if code == 0:
            i -= 1
            w[i] = j
        elif code > 0:
            if j + code > m - 1:
                raise ValueError(f"corrupt direction +{code} at cell ({i}, {j})")
            j += code
        elif code != START and -code <= min(i, j):
            k = -code
            for step in range(1, k + 1):
                w[i - step] = j - step
            i -= k
            j -= k
        else:
            raise ValueError(f"corrupt direction {code} at cell ({i}, {j})")
    if int(d[j, 0]) != START:
        raise ValueError("column 0 lacks the start marker")
    return w


def _check_warp(w: np.ndarray, n: int, m: int) -> None:
    if w.shape != (n,):
        raise ValueError(f"warp must have length {n}")
    if np.any(w < 0) or np.any(w > m - 1):
        raise ValueError("warp rows must lie in [0, m - 1]")
    if n > 1 and np.any(w[1:] > w[:-1] + 1):
        raise ValueError("warp may climb at most one row per sample")


def _entry_rows(w: np.ndarray) -> np.ndarray:
    # Row at which the path enters each column: one above the previous exit on
    # a climb, the previous exit otherwise (any descent then happens in-column).
    entry = w.copy()
    if w.size > 1:
        prev = w[:-1]
        entry[1:] = np.where(w[1:] == prev + 1, w[1:], prev)
    return entry


def compute_evo(f, g, params: EtvoParams, w) -> np.ndarray:
    """Per-sample value offset: every squared error the path charges to column i."""
    fv, gv = _check_instance(f, g, params)
    w = np.asarray(w, dtype=np.int64)
    n, m = gv.size, params.m
    _check_warp(w, n, m)
    idx = np.arange(n)
    evo = (gv - fv[idx - w + m - 1]) ** 2
    entry = _entry_rows(w)
    for i in np.flatnonzero(entry > w):
        rows = np.arange(w[i] + 1, entry[i] + 1)
        evo[i] += float(np.sum((gv[i] - fv[i - rows + m - 1]) ** 2))
    return evo


def adjustments(w) -> tuple[int, int]:
    """``(count, travel)`` of offset adjustments implied by ``w``.

    A run of consecutive one-row climbs is one adjustment; each drop is one.
    ``travel`` is ``sum |w[k+1] - w[k]|``.
    """
    w = np.asarray(w, dtype=np.int64)
    if w.size < 2:
        return 0, 0
    step = np.diff(w)
    climbing = step == 1
    run_starts = int(np.count_nonzero(climbing[1:] & ~climbing[:-1])) + int(climbing[0])
    drops = int(np.count_nonzero(step < 0))
    return run_starts + drops, int(np.sum(np.abs(step)))


def penalty_of_warp(w, params: EtvoParams) -> float:
    count, travel = adjustments(w)
    return travel * params.p_prop + count * (params.p_fixed + params.p_slack)


def run_etvo(f, g, params: EtvoParams) -> AlignmentResult:
    d, final = forward_pass(f, g, params)
    w = backtrack(d, final)
    evo = compute_evo(f, g, params, w)
    path_cost = float(final[w[-1]])
    penalty_cost = path_cost - math.fsum(evo)
    eto = params.dt_min + w * params.t
    return AlignmentResult(w, eto, evo, path_cost, penalty_cost)


def reference_window(sensed: UniformSeries, g: UniformSeries, params: EtvoParams) -> UniformSeries:
    """Cut the ``len(g) + m - 1`` sensed samples that ``g`` is aligned against.

    The first sample sits at ``g.t0 - dt_min - (m - 1) * t``. Missing lead-in
    or tail is an error; nothing is padded.
    """
    if not math.isclose(sensed.dt, g.dt, rel_tol=1e-9):
        raise ValueError(f"sampling period mismatch: {sensed.dt} vs {g.dt}")
    if not math.isclose(params.t, g.dt, rel_tol=1e-9):
        raise ValueError(f"params.t={params.t} differs from the series period {g.dt}")
    start_t = g.t0 - params.dt_min - (params.m - 1) * params.t
    start = sensed.index_of(start_t)
    stop = start + len(g) + params.m - 1
    if start < 0:
        raise ValueError(
            f"sensed trace starts at {sensed.t0:g} s but the window needs lead-in from {start_t:g} s"
        )
    if stop > len(sensed):
        raise ValueError(
            f"sensed trace ends at {sensed.t_end:g} s but the window needs samples up to "
            f"{start_t + (stop - start - 1) * sensed.dt:g} s"
        )
    return sensed.slice(start, stop)
