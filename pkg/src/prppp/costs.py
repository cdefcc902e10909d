"""Inventory simulation, cost evaluation and production re-planning.

Functions here read instance data by attribute name, so they accept either an
``Instance`` or the redacted ``SupplierView``. Only ``evaluate_global_cost``
touches the private retailer holding costs, and it is for tests and the
omniscient CLI report only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import EPS, Plan
from .routing import route_cost


class InfeasiblePlanError(ValueError):
    """A cost was requested for a plan with negative inventory."""


def simulate_inventory(data, plan: Plan) -> np.ndarray:
    """End-of-period inventories, shape ``(n+1, T)``; negative values are kept."""
    n, T = data.n_retailers, data.horizon
    q = plan.delivery_matrix(n)
    flow = np.zeros((n + 1, T))
    flow[0] = np.asarray(plan.production_qty) - q[1:].sum(axis=0)
    flow[1:] = q[1:] - data.demand[1:]
    return data.initial_inventory[:, None] + np.cumsum(flow, axis=1)


def period_route_costs(data, plan: Plan) -> np.ndarray:
    """Total routing cost of each period, pooled over vehicles."""
    out = np.zeros(data.horizon)
    for (_k, t), nodes in plan.routes.items():
        out[t - 1] += route_cost(nodes, data.transport_cost)
    return out


def _production_terms(data, plan: Plan, inventory: np.ndarray) -> np.ndarray:
    p = np.asarray(plan.production_qty, dtype=np.float64)
    y = np.asarray(plan.production_flag, dtype=np.float64)
    return data.unit_production_cost * p + data.setup_cost * y + data.supplier_inventory_cost * inventory[0]


def _require_nonnegative(inventory: np.ndarray, rows=slice(None)) -> None:
    neg = np.argwhere(inventory[rows] < -EPS)
    if neg.size:
        i, t = neg[0]
        raise InfeasiblePlanError(f"negative inventory {inventory[rows][i, t]:g} at row {i}, period {t + 1}")


def evaluate_global_cost(instance, plan: Plan) -> float:
    """Omniscient objective: production, setup, all holding costs and routing."""
    inv = simulate_inventory(instance, plan)
    _require_nonnegative(inv)
    production = instance.unit_production_cost * sum(plan.production_qty) + instance.setup_cost * sum(plan.production_flag)
    holding = float((np.asarray(instance.inventory_cost)[:, None] * inv).sum())
    return float(production) + holding + float(period_route_costs(instance, plan).sum())


def supplier_visible_cost(data, plan: Plan) -> float:
    """Objective with the holding term reduced to the supplier's own stock."""
    inv = simulate_inventory(data, plan)
    _require_nonnegative(inv)
    return float(_production_terms(data, plan, inv).sum()) + float(period_route_costs(data, plan).sum())


def _period_totals(deliveries, horizon: int) -> np.ndarray:
    if isinstance(deliveries, Mapping):
        tot = np.zeros(horizon)
        for (_i, _k, t), q in deliveries.items():
            tot[t - 1] += q
        return tot
    return np.asarray(deliveries, dtype=np.float64).reshape(horizon)


def lot_for_lot_production(data, deliveries) -> tuple[tuple[float, ...], tuple[bool, ...]] | None:
    """Produce each period's shipments just in time, pulling forward what exceeds capacity.

    ``deliveries`` is a delivery mapping or the per-period shipped totals.
    Supplier stock on hand is used first. Returns ``None`` when no schedule
    within the production capacity (and the supplier inventory cap) exists.
    """
    T = data.horizon
    ship = _period_totals(deliveries, T)
    if np.any(ship < -EPS):
        return None
    stock = float(data.initial_inventory[0])
    net = np.zeros(T)
    for t in range(T):
        used = min(stock, ship[t])
        stock -= used
        net[t] = ship[t] - used
    cap = data.production_capacity
    p = np.zeros(T)
    carry = 0.0
    for t in range(T - 1, -1, -1):
        need = net[t] + carry
        p[t] = min(cap, need)
        carry = need - p[t]
    if carry > EPS:
        return None
    level = float(data.initial_inventory[0]) + np.cumsum(p - ship)
    if np.any(level < -EPS) or np.any(level > data.inventory_capacity[0] + EPS):
        return None
    p[np.abs(p) < EPS] = 0.0
    return tuple(float(x) for x in p), tuple(bool(x > 0) for x in p)


@dataclass(frozen=True, eq=False)
class PlanState:
    """Quantities a plan induces that the utility calculus needs.

    ``route_cost`` and ``production_cost`` (``u p_t + f y_t + h_0 I_0t``) are
    per period; ``deliveries`` and ``inventory`` are ``(n+1, T)`` arrays.
    Golden fixtures build states directly; ``derive_state`` builds them from plans.
    """

    n_retailers: int
    deliveries: np.ndarray
    inventory: np.ndarray
    route_cost: np.ndarray
    production_cost: np.ndarray

    def __post_init__(self):
        for name in ("deliveries", "inventory", "route_cost", "production_cost"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def horizon(self) -> int:
        return self.route_cost.shape[0]

    def neighborhood(self, period: int) -> frozenset[int]:
        col = self.deliveries[:, period - 1]
        return frozenset(int(i) for i in np.flatnonzero(col > EPS) if i != 0)

    @property
    def neighborhoods(self) -> tuple[frozenset[int], ...]:
        return tuple(self.neighborhood(t) for t in range(1, self.horizon + 1))

    def supplier_visible_cost(self) -> float:
        return float(self.route_cost.sum() + self.production_cost.sum())


def derive_state(data, plan: Plan) -> PlanState:
    inv = simulate_inventory(data, plan)
    return PlanState(
        n_retailers=data.n_retailers,
        deliveries=plan.delivery_matrix(data.n_retailers),
        inventory=inv,
        route_cost=period_route_costs(data, plan),
        production_cost=_production_terms(data, plan, inv),
    )
