"""Vehicle routes for the retailers served in one period."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .kernels import held_karp_table, two_opt

EXACT_MAX_NODES = 12
_TIE_RTOL = 1e-9


class TooManyNodesError(ValueError):
    pass


def route_cost(nodes: Sequence[int], cost: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += float(cost[a, b])
    return total


@dataclass(frozen=True)
class Route:
    vehicle: int
    period: int
    nodes: tuple[int, ...]
    load: float
    cost: float

    @property
    def retailers(self) -> tuple[int, ...]:
        return self.nodes[1:-1]


def solve_tsp_exact(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Optimal tour through local node 0 by Held-Karp.

    Among optimal tours the lexicographically smallest node sequence wins.
    Node indices are local to ``cost``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    m = cost.shape[0]
    if m > EXACT_MAX_NODES:
        raise TooManyNodesError(f"{m} nodes exceeds the exact limit of {EXACT_MAX_NODES}; use solve_tsp_heuristic")
    if m <= 1:
        return (0, 0), 0.0
    g = held_karp_table(cost)
    remaining = (1 << (m - 1)) - 1
    best = min(cost[0, j] + g[remaining ^ (1 << (j - 1)), j] for j in range(1, m))
    tol = _TIE_RTOL * max(1.0, abs(best))
    tour = [0]
    here, spent = 0, 0.0
    while remaining:
        for j in range(1, m):
            bit = 1 << (j - 1)
            if remaining & bit and spent + cost[here, j] + g[remaining ^ bit, j] <= best + tol:
                spent += cost[here, j]
                remaining ^= bit
                here = j
                tour.append(j)
                break
        else:  # pragma: no cover - the DP guarantees a continuation
            raise RuntimeError("Held-Karp reconstruction failed")
    tour.append(0)
    tour = tuple(tour)
    return tour, route_cost(tour, cost)


def nearest_neighbor_tour(cost: np.ndarray) -> list[int]:
    m = cost.shape[0]
    tour = [0]
    left = set(range(1, m))
    here = 0
    while left:
        nxt = min(left, key=lambda j: (cost[here, j], j))
        left.remove(nxt)
        tour.append(nxt)
        here = nxt
    tour.append(0)
    return tour


def solve_tsp_heuristic(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Nearest neighbour from node 0, then first-improvement 2-opt."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.shape[0] <= 1:
        return (0, 0), 0.0
    tour = two_opt(np.array(nearest_neighbor_tour(cost), dtype=np.int64), cost)
    tour = tuple(int(v) for v in tour)
    return tour, route_cost(tour, cost)


def solve_tsp(cost: np.ndarray) -> tuple[tuple[int, ...], float]:
    if cost.shape[0] <= EXACT_MAX_NODES:
        return solve_tsp_exact(cost)
    return solve_tsp_heuristic(cost)


class RouteBuilder:
    """Memoised TSP over global node sets for one cost matrix.

    The cache only stores pure results, so sharing a builder never changes
    what ``assign_vehicles`` returns.
    """

    def __init__(self, cost: np.ndarray):
        self.cost = np.asarray(cost, dtype=np.float64)
        self._cache: dict[tuple[int, ...], tuple[tuple[int, ...], float]] = {}

    def tour(self, retailers) -> tuple[tuple[int, ...], float]:
        key = tuple(sorted(retailers))
        hit = self._cache.get(key)
        if hit is None:
            nodes = (0,) + key
            local, _ = solve_tsp(self.cost[np.ix_(nodes, nodes)])
            tour = tuple(nodes[v] for v in local)
            hit = (tour, route_cost(tour, self.cost))
            self._cache[key] = hit
        return hit


def assign_vehicles(
    deliveries: Mapping[int, float],
    capacity: float,
    n_vehicles: int,
    cost: np.ndarray | RouteBuilder,
    period: int = 1,
) -> list[Route] | None:
    """First-fit-decreasing packing into at most ``n_vehicles`` routes.

    Returns ``None`` when a single delivery exceeds ``capacity`` or more than
    ``n_vehicles`` bins are needed.
    """
    builder = cost if isinstance(cost, RouteBuilder) else RouteBuilder(cost)
    items = sorted(((q, i) for i, q in deliveries.items() if q > 0), key=lambda x: (-x[0], x[1]))
    bins: list[list] = []
    for q, i in items:
        if q > capacity + 1e-9:
            return None
        for b in bins:
            if b[0] + q <= capacity + 1e-9:
                b[0] += q
                b[1].append(i)
                break
        else:
            bins.append([q, [i]])
    if len(bins) > n_vehicles:
        return None
    routes = []
    for k, (load, members) in enumerate(bins, start=1):
        tour, c = builder.tour(members)
        routes.append(Route(vehicle=k, period=period, nodes=tour, load=float(load), cost=c))
    return routes
