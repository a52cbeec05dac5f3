"""Classic dynamic time warping, kept as the comparison baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .signal import UniformSeries

__all__ = ["DtwResult", "dtw_align", "dtw_distance", "warp_to_delay", "check_warp_path", "path_residuals"]

# Direction codes stored per cell during the forward pass.
_DIAG, _UP, _LEFT = 0, 1, 2

# 2-bit move codes: 1.6e9 cells is 400 MB, enough for N = 40 000.
MAX_CELLS = 1_600_000_000


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: list[tuple[int, int]]
    delay_series: np.ndarray


@nb.njit(cache=True)
def _dtw_kernel(f, g):
    n = f.shape[0]
    prev = np.empty(n)
    cur = np.empty(n)
    # Two bits per cell, four cells per byte along j.
    moves = np.zeros((n, (n + 3) // 4), np.uint8)
    # Row i of the accumulated cost; column index is the g position j.
    acc = 0.0
    for j in range(n):
        d = f[0] - g[j]
        acc += d * d
        prev[j] = acc
        moves[0, j >> 2] |= _LEFT << ((j & 3) * 2)
    for i in range(1, n):
        d = f[i] - g[0]
        cur[0] = prev[0] + d * d
        moves[i, 0] |= _UP
        for j in range(1, n):
            best = prev[j - 1]
            move = _DIAG
            if prev[j] < best:
                best = prev[j]
                move = _UP
            if cur[j - 1] < best:
                best = cur[j - 1]
                move = _LEFT
            d = f[i] - g[j]
            cur[j] = best + d * d
            moves[i, j >> 2] |= move << ((j & 3) * 2)
        prev, cur = cur, prev
    return prev[n - 1], moves


@nb.njit(cache=True)
def _backtrack_kernel(moves, n):
    out = np.empty((2 * n - 1, 2), np.int64)
    i = j = n - 1
    k = 0
    out[k, 0], out[k, 1] = i, j
    while i > 0 or j > 0:
        move = (moves[i, j >> 2] >> ((j & 3) * 2)) & 3
        if move == _DIAG:
            i -= 1
            j -= 1
        elif move == _UP:
            i -= 1
        else:
            j -= 1
        k += 1
        out[k, 0], out[k, 1] = i, j
    return out[: k + 1][::-1].copy()


def _backtrack(moves: np.ndarray, n: int) -> list[tuple[int, int]]:
    return [(int(i), int(j)) for i, j in _backtrack_kernel(moves, n)]


def _as_array(x) -> np.ndarray:
    if isinstance(x, UniformSeries):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def dtw_distance(f, g) -> tuple[float, list[tuple[int, int]]]:
    """Minimum summed squared error over all warp paths, and the path taking it.

    Ties are broken towards the diagonal, then advancing ``f`` alone, then
    advancing ``g`` alone.
    """
    fv, gv = _as_array(f), _as_array(g)
    if fv.size != gv.size:
        raise ValueError(f"length mismatch: {fv.size} vs {gv.size}")
    if fv.size == 0:
        raise ValueError("empty input")
    if fv.size * fv.size > MAX_CELLS:
        raise ValueError(f"N={fv.size} exceeds the DTW matrix budget of {MAX_CELLS} cells")
    distance, moves = _dtw_kernel(fv, gv)
    return float(distance), _backtrack(moves, fv.size)


def check_warp_path(path, n_f: int, n_g: int) -> None:
    if not path or tuple(path[0]) != (0, 0) or tuple(path[-1]) != (n_f - 1, n_g - 1):
        raise ValueError("warp path must run from (0, 0) to the last pair")
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        di, dj = i1 - i0, j1 - j0
        if di not in (0, 1) or dj not in (0, 1) or di + dj == 0:
            raise ValueError(f"step {(i0, j0)} -> {(i1, j1)} breaks monotonicity/continuity")


def warp_to_delay(path, dt: float) -> np.ndarray:
    """Per-``g``-sample delay ``(j - i_first(j)) * dt``.

    ``i_first(j)`` is the smallest ``f`` index paired with ``g`` index ``j``, so
    a ``g`` that lags ``f`` gives positive delays.
    """
    n_f = path[-1][0] + 1
    n_g = path[-1][1] + 1
    check_warp_path(path, n_f, n_g)
    first = np.full(n_g, -1, dtype=np.int64)
    for i, j in path:
        if first[j] < 0:
            first[j] = i
    return (np.arange(n_g) - first) * dt


def path_residuals(f, g, path) -> np.ndarray:
    """Squared residuals summed per ``g`` index along ``path``."""
    fv, gv = _as_array(f), _as_array(g)
    out = np.zeros(gv.size)
    for i, j in path:
        out[j] += (fv[i] - gv[j]) ** 2
    return out


def dtw_align(f: UniformSeries, g: UniformSeries) -> DtwResult:
    if len(f) != len(g):
        raise ValueError(f"length mismatch: {len(f)} vs {len(g)}")
    if not np.isclose(f.dt, g.dt, rtol=1e-9, atol=0):
        raise ValueError(f"sampling period mismatch: {f.dt} vs {g.dt}")
    distance, path = dtw_distance(f, g)
    return DtwResult(distance, path, warp_to_delay(path, g.dt))
