"""Hot numeric kernels: Held-Karp tables and 2-opt sweeps.

Every kernel exists twice: a loop version compiled with numba and a numpy
version. ``held_karp_table`` and ``two_opt`` dispatch on ``HAVE_NUMBA``; the
``*_loops`` / ``*_numpy`` variants stay importable so tests and the benchmark
can compare them directly.
"""
from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, njit

IMPROVE_EPS = 1e-9


def _held_karp_loops(cost):
    # g[S, j]: cheapest path that starts at j, visits every node of S (bitmask
    # over nodes 1..m-1, bit j-1), then returns to node 0. j must not be in S.
    m = cost.shape[0]
    r = m - 1
    full = 1 << r
    g = np.full((full, m), np.inf)
    for j in range(1, m):
        g[0, j] = cost[j, 0]
    for mask in range(1, full):
        for j in range(1, m):
            if mask & (1 << (j - 1)):
                continue
            best = np.inf
            for k in range(1, m):
                bit = 1 << (k - 1)
                if mask & bit:
                    val = cost[j, k] + g[mask ^ bit, k]
                    if val < best:
                        best = val
            g[mask, j] = best
    return g


_held_karp_jit = njit(_held_karp_loops)


def _held_karp_numpy(cost):
    m = cost.shape[0]
    r = m - 1
    full = 1 << r
    g = np.full((full, m), np.inf)
    g[0, 1:] = cost[1:, 0]
    masks = np.arange(full)
    popcount = np.zeros(full, dtype=np.int64)
    for b in range(r):
        popcount += (masks >> b) & 1
    nodes = np.arange(1, m)
    bits = 1 << (nodes - 1)
    for size in range(1, r + 1):
        layer = masks[popcount == size]
        # cand[s, j, k] = cost[j, k] + g[layer[s] ^ bit_k, k] for k in layer[s]
        inside = (layer[:, None] & bits[None, :]) != 0
        prev = np.where(inside, layer[:, None] ^ bits[None, :], 0)
        sub = g[prev, nodes[None, :]]
        sub = np.where(inside, sub, np.inf)
        cand = cost[1:, 1:][None, :, :] + sub[:, None, :]
        best = cand.min(axis=2)
        best = np.where(inside, np.inf, best)
        g[layer[:, None], nodes[None, :]] = best
    return g


def held_karp_table(cost: np.ndarray) -> np.ndarray:
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if HAVE_NUMBA:
        return _held_karp_jit(cost)
    return _held_karp_numpy(cost)


def _two_opt_loops(tour, cost):
    # First improvement, fixed scan order, restart after every accepted move.
    t = tour.copy()
    n = t.shape[0]
    improved = True
    while improved:
        improved = False
        for i in range(n - 3):
            a = t[i]
            b = t[i + 1]
            for j in range(i + 2, n - 1):
                c = t[j]
                d = t[j + 1]
                delta = (cost[a, c] + cost[b, d]) - (cost[a, b] + cost[c, d])
                if delta < -IMPROVE_EPS:
                    lo = i + 1
                    hi = j
                    while lo < hi:
                        tmp = t[lo]
                        t[lo] = t[hi]
                        t[hi] = tmp
                        lo += 1
                        hi -= 1
                    improved = True
                    break
            if improved:
                break
    return t


_two_opt_jit = njit(_two_opt_loops)


def _two_opt_numpy(tour, cost):
    t = tour.copy()
    n = t.shape[0]
    if n < 4:
        return t
    ii, jj = np.triu_indices(n - 1, k=2)
    while True:
        a, b, c, d = t[ii], t[ii + 1], t[jj], t[jj + 1]
        delta = (cost[a, c] + cost[b, d]) - (cost[a, b] + cost[c, d])
        hits = np.flatnonzero(delta < -IMPROVE_EPS)
        if hits.size == 0:
            return t
        # triu_indices is row-major, so the first hit is the scan-order first.
        i, j = ii[hits[0]], jj[hits[0]]
        t[i + 1 : j + 1] = t[i + 1 : j + 1][::-1].copy()


def two_opt(tour: np.ndarray, cost: np.ndarray) -> np.ndarray:
    tour = np.ascontiguousarray(tour, dtype=np.int64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if HAVE_NUMBA:
        return _two_opt_jit(tour, cost)
    return _two_opt_numpy(tour, cost)
