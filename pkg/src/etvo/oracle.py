"""Slow reference solutions for small instances.

Used by the tests and by ``etvo analyze --verify``. Two independent ETVO
references live here: an enumeration of move sequences and a top-down
recursion that scans every step size explicitly.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .engine import EtvoParams
from .signal import UniformSeries

__all__ = [
    "MAX_DTW_N",
    "MAX_ETVO_N",
    "MAX_ETVO_M",
    "PathEnumeration",
    "brute_force_dtw",
    "brute_force_etvo",
    "enumerate_etvo",
    "memo_etvo_costs",
]

MAX_DTW_N = 10
MAX_ETVO_N = 12
MAX_ETVO_M = 5


def _values(x) -> np.ndarray:
    if isinstance(x, UniformSeries):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def brute_force_dtw(f, g) -> float:
    """Minimum path cost over every DTW warp path (depth-first, bound-pruned)."""
    fv, gv = _values(f).tolist(), _values(g).tolist()
    n = len(fv)
    if n != len(gv) or n == 0:
        raise ValueError("inputs must be non-empty and of equal length")
    if n > MAX_DTW_N:
        raise ValueError(f"brute force limited to N <= {MAX_DTW_N}")
    best = sum((a - b) ** 2 for a, b in zip(fv, gv))

    def walk(i, j, acc):
        nonlocal best
        acc += (fv[i] - gv[j]) ** 2
        if acc > best:
            return
        if i == n - 1 and j == n - 1:
            best = min(best, acc)
            return
        if i < n - 1 and j < n - 1:
            walk(i + 1, j + 1, acc)
        if i < n - 1:
            walk(i + 1, j, acc)
        if j < n - 1:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return best


@dataclass(frozen=True)
class PathEnumeration:
    n: int
    m: int
    best_cost: float
    best_path: tuple[int, ...]
    final_costs: tuple[float, ...]


def enumerate_etvo(f, g, params: EtvoParams) -> PathEnumeration:
    """Walk every admissible move sequence and keep the cheapest per end row.

    Moves: forward one column; descend ``k`` rows inside a column (not in
    column 0); climb a diagonal run of ``k`` columns. Each descent or run is
    one adjustment costing ``k * p_prop + p_fixed + p_slack``. Branches whose
    partial cost already reaches every row's best are cut, which never
    changes the optimum because costs only grow.
    """
    fv, gv = _values(f), _values(g)
    m = params.m
    n = gv.size
    if fv.size != n + m - 1:
        raise ValueError("f must be m - 1 samples longer than g")
    if n > MAX_ETVO_N or m > MAX_ETVO_M:
        raise ValueError(f"enumeration limited to N <= {MAX_ETVO_N}, M <= {MAX_ETVO_M}")
    cell = [[(gv[i] - fv[i - j + m - 1]) ** 2 for j in range(m)] for i in range(n)]
    p_prop, adj = params.p_prop, params.p_fixed + params.p_slack

    # Seed bounds with the constant-row paths.
    final = [sum(cell[i][j] for i in range(n)) for j in range(m)]
    best_path = {j: [j] * n for j in range(m)}
    bound = max(final)
    rows = [0] * n
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10_000))

    def record(i, j, acc):
        nonlocal bound
        if acc < final[j]:
            final[j] = acc
            best_path[j] = rows[:]
            bound = max(final)

    def at_cell(i, j, acc):
        # Path stands at (i, j); rows[i] is the lowest row reached so far.
        if acc >= bound:
            return
        rows[i] = j
        if i == n - 1:
            record(i, j, acc)
        else:
            at_cell(i + 1, j, acc + cell[i + 1][j])
        if i > 0:
            extra = 0.0
            for k in range(1, j + 1):
                extra += cell[i][j - k]
                at_cell(i, j - k, acc + extra + k * p_prop + adj)
                rows[i] = j
        extra = 0.0
        for k in range(1, min(n - 1 - i, m - 1 - j) + 1):
            extra += cell[i + k][j + k]
            for l in range(1, k):
                rows[i + l] = j + l
            at_cell(i + k, j + k, acc + extra + k * p_prop + adj)

    try:
        for j in range(m):
            at_cell(0, j, cell[0][j])
    finally:
        sys.setrecursionlimit(limit)

    j_best = min(range(m), key=lambda r: (final[r], r))
    return PathEnumeration(n, m, final[j_best], tuple(best_path[j_best]), tuple(final))


def brute_force_etvo(f, g, params: EtvoParams) -> tuple[float, np.ndarray]:
    res = enumerate_etvo(f, g, params)
    return res.best_cost, np.array(res.best_path, dtype=np.int64)


def memo_etvo_costs(f, g, params: EtvoParams) -> np.ndarray:
    """Last-column costs from a direct top-down evaluation of the recurrences."""
    fv, gv = _values(f), _values(g)
    m = params.m
    n = gv.size
    if fv.size != n + m - 1:
        raise ValueError("f must be m - 1 samples longer than g")
    pp, pf, ps = params.p_prop, params.p_fixed, params.p_slack

    def dl(i, j):
        return (gv[i] - fv[i - j + m - 1]) ** 2

    @lru_cache(maxsize=None)
    def cost(i, j):
        if i == 0:
            return dl(0, j)
        stay = cost(i - 1, j)
        down = math.inf
        for k in range(1, m - j):
            c = cost(i, j + k) + sum(dl(i, j + l) for l in range(1, k)) + k * pp + pf
            down = min(down, c)
        up = math.inf
        for k in range(1, min(i, j) + 1):
            c = cost(i - k, j - k) + sum(dl(i - l, j - l) for l in range(1, k)) + k * pp + pf
            up = min(up, c)
        return dl(i, j) + min(stay, down + ps, up + ps)

    return np.array([cost(n - 1, j) for j in range(m)])
