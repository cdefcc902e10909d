"""Constraint checker for the full production-routing MILP.

Every constraint of the formulation is checked against a ``Plan`` and each
breach becomes a ``Violation`` with a strictly positive magnitude.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .costs import simulate_inventory
from .model import EPS, Plan


class Constraint(str, Enum):
    FlowBalanceSupplier = "FlowBalanceSupplier"
    FlowBalanceRetailer = "FlowBalanceRetailer"
    SetupBigM = "SetupBigM"
    SupplierInventoryCap = "SupplierInventoryCap"
    RetailerInventoryCap = "RetailerInventoryCap"
    VisitBigM = "VisitBigM"
    SingleVehicleVisit = "SingleVehicleVisit"
    FlowConservation = "FlowConservation"
    VehicleCapacity = "VehicleCapacity"
    Subtour = "Subtour"
    Domain = "Domain"


@dataclass(frozen=True)
class Violation:
    constraint: Constraint
    node: int | None
    vehicle: int | None
    period: int | None
    magnitude: float

    @property
    def location(self) -> tuple[int | None, int | None, int | None]:
        return (self.node, self.vehicle, self.period)

    def to_dict(self) -> dict:
        return {
            "constraint": self.constraint.value,
            "node": self.node,
            "vehicle": self.vehicle,
            "period": self.period,
            "magnitude": self.magnitude,
        }


def production_big_m(data) -> np.ndarray:
    """``M_t = min(C, total demand in periods t..T)``."""
    remaining = np.cumsum(data.demand[1:].sum(axis=0)[::-1])[::-1]
    return np.minimum(data.production_capacity, remaining)


def visit_big_m(data) -> np.ndarray:
    """``M_it = min(Q, L_i, demand of i in periods t..T)``, shape ``(n+1, T)``."""
    remaining = np.cumsum(data.demand[:, ::-1], axis=1)[:, ::-1]
    cap = np.minimum(data.vehicle_capacity, np.asarray(data.inventory_capacity))[:, None]
    return np.minimum(cap, remaining)


def _subtour_excess(arcs: list[tuple[int, int]]) -> list[tuple[frozenset[int], int]]:
    # Components of the retailer-only arc graph; a component S carrying
    # |S| or more arcs breaks sum_{i,j in S} x_ij <= |S| - 1.
    parent: dict[int, int] = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    inner = [(a, b) for a, b in arcs if a != 0 and b != 0]
    for a, b in inner:
        parent[find(a)] = find(b)
    groups: dict[int, set[int]] = defaultdict(set)
    counts: dict[int, int] = defaultdict(int)
    for a, b in inner:
        groups[find(a)].update((a, b))
        counts[find(a)] += 1
    out = []
    for root, nodes in groups.items():
        if len(nodes) >= 2 and counts[root] > len(nodes) - 1:
            out.append((frozenset(nodes), counts[root] - (len(nodes) - 1)))
    return sorted(out, key=lambda x: min(x[0]))


def quantities_feasible(data, q: np.ndarray, production_qty, production_flag) -> bool:
    """Inventory, setup and visit-bound rows only, for a ``(n+1, T)`` delivery matrix.

    Meant for plans whose routes come from vehicle assignment and are
    well-formed by construction; ``check_feasibility`` covers everything.
    """
    p = np.asarray(production_qty, dtype=np.float64)
    y = np.asarray(production_flag, dtype=np.float64)
    shipped = q[1:].sum(axis=0)
    supplier = data.initial_inventory[0] + np.cumsum(p - shipped)
    retail = data.initial_inventory[1:, None] + np.cumsum(q[1:] - data.demand[1:], axis=1)
    before = np.concatenate([data.initial_inventory[1:, None], retail[:, :-1]], axis=1)
    cap = np.asarray(data.inventory_capacity)
    return bool(
        np.all(q >= -EPS)
        and np.all(p >= -EPS)
        and np.all(supplier >= -EPS)
        and np.all(retail >= -EPS)
        and np.all(p - production_big_m(data) * y <= EPS)
        and np.all(supplier - cap[0] <= EPS)
        and np.all(before + q[1:] - cap[1:, None] <= EPS)
        and np.all(q - visit_big_m(data) <= EPS)
    )


def check_feasibility(data, plan: Plan) -> list[Violation]:
    """All constraint breaches of ``plan``; an empty list means feasible."""
    n, T, m = data.n_retailers, data.horizon, data.n_vehicles
    out: list[Violation] = []

    def emit(tag, node, vehicle, period, mag):
        if mag > EPS:
            out.append(Violation(tag, node, vehicle, period, float(mag)))

    if len(plan.production_qty) != T or len(plan.production_flag) != T:
        emit(Constraint.Domain, None, None, None, abs(len(plan.production_qty) - T) or 1.0)
        return out

    # Domain: indices in range, quantities nonnegative.
    deliveries = {}
    for (i, k, t), q in plan.deliveries.items():
        if not (1 <= i <= n and 1 <= k <= m and 1 <= t <= T):
            emit(Constraint.Domain, i, k, t, abs(q) or 1.0)
            continue
        if q < 0:
            emit(Constraint.Domain, i, k, t, -q)
        deliveries[(i, k, t)] = q
    routes = {}
    for (k, t), nodes in plan.routes.items():
        if not (1 <= k <= m and 1 <= t <= T):
            emit(Constraint.Domain, None, k, t, 1.0)
            continue
        bad = [v for v in nodes if not 0 <= v <= n]
        if bad:
            emit(Constraint.Domain, bad[0], k, t, float(len(bad)))
            continue
        loops = sum(1 for a, b in zip(nodes[:-1], nodes[1:]) if a == b)
        emit(Constraint.Domain, None, k, t, float(loops))
        routes[(k, t)] = nodes
    for t, p in enumerate(plan.production_qty, start=1):
        emit(Constraint.Domain, 0, None, t, -p)

    clean = Plan(deliveries, routes, plan.production_qty, plan.production_flag)
    inv = simulate_inventory(data, clean)
    q = clean.delivery_matrix(n)

    # Lot sizing block.
    big_m = production_big_m(data)
    for t in range(1, T + 1):
        emit(Constraint.FlowBalanceSupplier, 0, None, t, -inv[0, t - 1])
        y = 1.0 if plan.production_flag[t - 1] else 0.0
        emit(Constraint.SetupBigM, 0, None, t, plan.production_qty[t - 1] - big_m[t - 1] * y)
        emit(Constraint.SupplierInventoryCap, 0, None, t, inv[0, t - 1] - data.inventory_capacity[0])
    for i in range(1, n + 1):
        before = np.concatenate([[data.initial_inventory[i]], inv[i, :-1]])
        for t in range(1, T + 1):
            emit(Constraint.FlowBalanceRetailer, i, None, t, -inv[i, t - 1])
            emit(Constraint.RetailerInventoryCap, i, None, t, before[t - 1] + q[i, t - 1] - data.inventory_capacity[i])

    # Routing block.
    visit_m = visit_big_m(data)
    visits: dict[tuple[int, int], list[int]] = defaultdict(list)  # (i, t) -> vehicles
    for (k, t), nodes in routes.items():
        interior = set(nodes[1:-1]) - {0}
        for i in sorted(interior):
            visits[(i, t)].append(k)
        arcs = list(zip(nodes[:-1], nodes[1:]))
        degree: dict[int, int] = defaultdict(int)
        for a, b in arcs:
            degree[a] += 1
            degree[b] += 1
        served = bool(interior)
        for v in sorted(set(degree) | {0}):
            z = 1 if (v in interior or (v == 0 and served)) else 0
            emit(Constraint.FlowConservation, v, k, t, abs(degree.get(v, 0) - 2 * z))
        for nodes_s, excess in _subtour_excess(arcs):
            emit(Constraint.Subtour, min(nodes_s), k, t, float(excess))
    for (i, k, t), qty in deliveries.items():
        visited = k in visits.get((i, t), [])
        emit(Constraint.VisitBigM, i, k, t, qty - (visit_m[i, t - 1] if visited else 0.0))
    for (i, t), ks in sorted(visits.items()):
        emit(Constraint.SingleVehicleVisit, i, None, t, float(len(ks) - 1))
    loads: dict[tuple[int, int], float] = defaultdict(float)
    for (i, k, t), qty in deliveries.items():
        loads[(k, t)] += qty
    for (k, t), load in sorted(loads.items()):
        z0 = 1.0 if any(v != 0 for v in routes.get((k, t), ())) else 0.0
        emit(Constraint.VehicleCapacity, None, k, t, load - data.vehicle_capacity * z0)
    return out
