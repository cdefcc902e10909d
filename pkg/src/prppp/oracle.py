"""Exhaustive exact solver for desk-scale instances.

Each retailer's net demand of a period is delivered whole in one period at or
before it. The oracle enumerates every such assignment across retailers,
routes each period by exact TSP and schedules production optimally for the
resulting shipments. Within that candidate set the result is exact.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .agents import _net_demand
from .costs import evaluate_global_cost
from .feasibility import check_feasibility, production_big_m
from .model import EPS, Instance, Plan
from .routing import RouteBuilder

MAX_RETAILERS = 4
MAX_HORIZON = 3


class OracleBoundsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OracleResult:
    cost: float
    plan: Plan | None
    nodes_explored: int
    fingerprint: str
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "plan": None if self.plan is None else self.plan.to_dict(),
            "nodes_explored": self.nodes_explored,
            "fingerprint": self.fingerprint,
            "complete": self.complete,
        }


def _retailer_options(instance: Instance, i: int):
    """(quantities, holding cost) for every assignment of retailer ``i``'s demand periods."""
    T = instance.horizon
    d = instance.demand[i]
    init = float(instance.initial_inventory[i])
    net = _net_demand(d, init)
    need = [t for t in range(T) if net[t] > EPS]
    cap = min(instance.inventory_capacity[i], np.inf)
    out = []
    for assign in itertools.product(*[range(t + 1) for t in need]):
        q = np.zeros(T)
        for t, s in zip(need, assign):
            q[s] += net[t]
        inv = init + np.cumsum(q - d)
        start = np.concatenate([[init], inv[:-1]])
        if np.any(inv < -EPS) or np.any(start + q > cap + EPS) or np.any(q > instance.vehicle_capacity + EPS):
            continue
        out.append((q, float(instance.inventory_cost[i] * inv.sum())))
    return out


def optimal_production(instance, shipments: np.ndarray):
    """Cheapest production schedule for per-period ``shipments``.

    Tries every setup pattern; for a fixed pattern, serving each unit from the
    latest open period with spare capacity minimises supplier holding.
    Returns ``(cost, p, y)`` or ``None`` when nothing is feasible.
    """
    T = instance.horizon
    stock = float(instance.initial_inventory[0])
    net = np.zeros(T)
    for t in range(T):
        used = min(stock, shipments[t])
        stock -= used
        net[t] = shipments[t] - used
    cap = np.minimum(instance.production_capacity, production_big_m(instance))
    best = None
    for y in itertools.product((False, True), repeat=T):
        p = np.zeros(T)
        room = np.where(y, cap, 0.0)
        ok = True
        for t in range(T - 1, -1, -1):
            need = net[t]
            for s in range(t, -1, -1):
                if need <= EPS:
                    break
                take = min(need, room[s])
                room[s] -= take
                p[s] += take
                need -= take
            if need > EPS:
                ok = False
                break
        if not ok:
            continue
        level = float(instance.initial_inventory[0]) + np.cumsum(p - shipments)
        if np.any(level < -EPS) or np.any(level > instance.inventory_capacity[0] + EPS):
            continue
        flags = tuple(bool(b and pp > EPS) for b, pp in zip(y, p))
        cost = (
            instance.unit_production_cost * p.sum()
            + instance.setup_cost * sum(flags)
            + instance.supplier_inventory_cost * level.sum()
        )
        key = (round(cost, 9), flags)
        if best is None or key < best[0]:
            best = (key, float(cost), tuple(float(x) for x in p), flags)
    if best is None:
        return None
    return best[1], best[2], best[3]


def solve_exact(instance: Instance, max_nodes: int | None = None, time_limit: float | None = None) -> OracleResult:
    n, T = instance.n_retailers, instance.horizon
    if n > MAX_RETAILERS or T > MAX_HORIZON or instance.n_vehicles != 1:
        raise OracleBoundsError(
            f"oracle handles n <= {MAX_RETAILERS}, T <= {MAX_HORIZON}, one vehicle; "
            f"got n={n}, T={T}, m={instance.n_vehicles}"
        )
    fp = instance.fingerprint()
    options = [_retailer_options(instance, i) for i in instance.retailers]
    if any(not opts for opts in options):
        return OracleResult(float("inf"), None, 0, fp)
    builder = RouteBuilder(instance.transport_cost)
    route_memo: dict[frozenset, float] = {}
    prod_memo: dict[tuple, tuple | None] = {}
    Q = instance.vehicle_capacity
    start = time.monotonic()
    best = None
    explored = 0
    complete = True
    for combo in itertools.product(*[range(len(o)) for o in options]):
        if (max_nodes is not None and explored >= max_nodes) or (
            time_limit is not None and time.monotonic() - start > time_limit
        ):
            complete = False
            break
        explored += 1
        q = np.vstack([options[i][c][0] for i, c in enumerate(combo)])
        ship = q.sum(axis=0)
        if np.any(ship > Q + EPS):
            continue
        key = tuple(ship.tolist())
        if key not in prod_memo:
            prod_memo[key] = optimal_production(instance, ship)
        prod = prod_memo[key]
        if prod is None:
            continue
        routing = 0.0
        for t in range(T):
            members = frozenset(i + 1 for i in range(n) if q[i, t] > EPS)
            if members not in route_memo:
                route_memo[members] = builder.tour(members)[1] if members else 0.0
            routing += route_memo[members]
        cost = prod[0] + routing + sum(options[i][c][1] for i, c in enumerate(combo))
        if best is None or cost < best[0] - 1e-9:
            best = (cost, combo, q, prod)
    if best is None:
        return OracleResult(float("inf"), None, explored, fp, complete)
    _, combo, q, (_, p, y) = best
    deliveries, routes = {}, {}
    for t in range(1, T + 1):
        members = [i for i in instance.retailers if q[i - 1, t - 1] > EPS]
        if not members:
            continue
        routes[(1, t)] = builder.tour(members)[0]
        for i in members:
            deliveries[(i, 1, t)] = float(q[i - 1, t - 1])
    plan = Plan(deliveries, routes, p, y)
    violations = check_feasibility(instance, plan)
    if violations:  # pragma: no cover - enumeration only keeps feasible candidates
        raise AssertionError(f"oracle plan infeasible: {violations}")
    return OracleResult(evaluate_global_cost(instance, plan), plan, explored, fp, complete)


def optimality_gap(instance: Instance, plan: Plan, oracle: OracleResult | None = None) -> float:
    oracle = oracle or solve_exact(instance)
    engine = evaluate_global_cost(instance, plan)
    if oracle.cost == 0:
        if abs(engine) <= EPS:
            return 0.0
        raise ZeroDivisionError("oracle cost is zero but the engine plan is not")
    return (engine - oracle.cost) / oracle.cost
