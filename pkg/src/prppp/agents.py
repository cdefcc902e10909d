"""Retailer utility calculus and the supplier/retailer privacy boundary.

``SupplierView`` is built by copying the public fields of an ``Instance``; it
has no attribute that could hold a retailer's holding cost. ``RetailerAgent``
owns exactly one private holding cost and only ever sees a ``RetailerView``
projected from a ``PlanState``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .costs import PlanState
from .model import EPS, Instance, InstanceError, Plan

DECISION_EPS = 1e-9
MAX_PATTERN_CANDIDATES = 5000


@dataclass(frozen=True, eq=False)
class SupplierView:
    """Everything the coordinator knows: the instance minus retailer holding costs."""

    n_retailers: int
    horizon: int
    n_vehicles: int
    unit_production_cost: float
    setup_cost: float
    supplier_inventory_cost: float
    demand: np.ndarray
    transport_cost: np.ndarray
    production_capacity: float
    vehicle_capacity: float
    inventory_capacity: np.ndarray
    initial_inventory: np.ndarray
    plan: Plan | None = None

    @classmethod
    def redact(cls, instance: Instance, plan: Plan | None = None) -> "SupplierView":
        return cls(
            n_retailers=instance.n_retailers,
            horizon=instance.horizon,
            n_vehicles=instance.n_vehicles,
            unit_production_cost=instance.unit_production_cost,
            setup_cost=instance.setup_cost,
            supplier_inventory_cost=float(instance.inventory_cost[0]),
            demand=instance.demand,
            transport_cost=instance.transport_cost,
            production_capacity=instance.production_capacity,
            vehicle_capacity=instance.vehicle_capacity,
            inventory_capacity=instance.inventory_capacity,
            initial_inventory=instance.initial_inventory,
            plan=plan,
        )

    def with_plan(self, plan: Plan) -> "SupplierView":
        return SupplierView(**{**self.__dict__, "plan": plan})

    @property
    def retailers(self) -> range:
        return range(1, self.n_retailers + 1)

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    def neighborhood(self, period: int) -> frozenset[int]:
        return self.plan.members(period) if self.plan is not None else frozenset()


@dataclass(frozen=True)
class RetailerView:
    """What retailer ``retailer`` sees of one plan state."""

    retailer: int
    holding_cost: float
    demand: tuple[float, ...]
    deliveries: tuple[float, ...]
    inventory: tuple[float, ...]
    shipping_price: tuple[float, ...]  # route_t / nb_t where served, else 0
    product_price: tuple[float, ...]  # (u p_t + f y_t + h_0 I_0t) / n
    neighbors: tuple[tuple[int, ...], ...]  # other members of own neighborhoods


@dataclass(frozen=True)
class UtilityReport:
    retailer: int
    inventory_term: tuple[float, ...]
    shipping_term: tuple[float, ...]
    production_term: tuple[float, ...]

    @property
    def period_utility(self) -> tuple[float, ...]:
        return tuple(-(a + b + c) for a, b, c in zip(self.inventory_term, self.shipping_term, self.production_term))

    @property
    def total(self) -> float:
        return float(sum(self.period_utility))


@dataclass(frozen=True)
class DeliveryPattern:
    quantities: tuple[float, ...]  # per period
    holding: float  # sum_t h_c I_ct

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(t for t, q in enumerate(self.quantities, start=1) if q > 0)


def project(state: PlanState, retailer: int, holding_cost: float, demand: Iterable[float]) -> RetailerView:
    """Redact a plan state down to retailer ``retailer``'s view."""
    c = retailer
    T = state.horizon
    ship, nbrs = [], []
    for t in range(1, T + 1):
        members = state.neighborhood(t)
        if c in members:
            ship.append(float(state.route_cost[t - 1]) / len(members))
            nbrs.append(tuple(sorted(members - {c})))
        else:
            ship.append(0.0)
            nbrs.append(())
    n = state.n_retailers
    return RetailerView(
        retailer=c,
        holding_cost=float(holding_cost),
        demand=tuple(float(x) for x in demand),
        deliveries=tuple(float(x) for x in state.deliveries[c]),
        inventory=tuple(float(x) for x in state.inventory[c]),
        shipping_price=tuple(ship),
        product_price=tuple(float(x) / n for x in state.production_cost),
        neighbors=tuple(nbrs),
    )


def total_utility(view: RetailerView) -> UtilityReport:
    """Per-period utility terms; the total is minus their sum."""
    if any(i < -EPS for i in view.inventory):
        raise ValueError(f"retailer {view.retailer} has negative inventory")
    return UtilityReport(
        retailer=view.retailer,
        inventory_term=tuple(view.holding_cost * i for i in view.inventory),
        shipping_term=view.shipping_price,
        production_term=view.product_price,
    )


def delta_utility(before: RetailerView, after: RetailerView, periods: Iterable[int] | None = None) -> float:
    """Utility gained by moving from ``before`` to ``after``.

    Summed over ``periods`` (1-based), or over every period when omitted;
    periods whose terms are unchanged contribute exactly zero either way.
    """
    ub = total_utility(before).period_utility
    ua = total_utility(after).period_utility
    idx = range(1, len(ub) + 1) if periods is None else sorted(set(periods))
    return float(sum(ua[t - 1] - ub[t - 1] for t in idx))


def retailer_decide(delta: float) -> bool:
    """Negotiate / vote in favour only for a strictly positive gain."""
    return delta > DECISION_EPS


def _net_demand(demand: np.ndarray, initial: float) -> np.ndarray:
    net = np.array(demand, dtype=np.float64)
    stock = initial
    for t in range(net.shape[0]):
        used = min(stock, net[t])
        net[t] -= used
        stock -= used
    return net


def _holding(quantities, demand, initial) -> np.ndarray:
    return initial + np.cumsum(np.asarray(quantities) - np.asarray(demand))


def _lead_window(need: list[int], limit: int) -> int:
    """Largest lead (periods of earliness) keeping the candidate count within ``limit``."""
    if not need:
        return 0
    window = 0
    while window < need[-1]:
        count = 1
        for t in need:
            count *= min(t, window + 1) + 1
        if count > limit:
            break
        window += 1
    return window


def enumerate_patterns(
    demand, initial: float, capacity: float, holding_cost: float, max_candidates: int = MAX_PATTERN_CANDIDATES
) -> list[DeliveryPattern]:
    """Patterns that serve each net-demand period from one delivery period at or before it.

    Patterns that break the retailer's own inventory cap are dropped. Long
    horizons bound how early a delivery may arrive so that at most
    ``max_candidates`` assignments are tried; the dropped ones carry the most
    holding.
    """
    demand = np.asarray(demand, dtype=np.float64)
    T = demand.shape[0]
    net = _net_demand(demand, initial)
    need = [t for t in range(T) if net[t] > EPS]
    window = _lead_window(need, max_candidates)
    choices = [range(max(0, t - window), t + 1) for t in need]
    out = []
    for assign in itertools.product(*choices):
        qty = np.zeros(T)
        for t, s in zip(need, assign):
            qty[s] += net[t]
        inv = _holding(qty, demand, initial)
        start = np.concatenate([[initial], inv[:-1]])
        if np.any(inv < -EPS) or np.any(start + qty > capacity + EPS):
            continue
        out.append(DeliveryPattern(tuple(float(x) for x in qty), float(holding_cost * inv.sum())))
    unique = {p.quantities: p for p in out}
    return list(unique.values())


def rank_patterns(patterns: list[DeliveryPattern]) -> list[DeliveryPattern]:
    return sorted(patterns, key=lambda p: (round(p.holding, 9), len(p.periods), p.quantities))


@dataclass(frozen=True)
class RetailerAgent:
    """A retailer with its private data. Nothing here is shared with the supplier."""

    retailer: int
    holding_cost: float = field(repr=False)
    demand: tuple[float, ...]
    initial_inventory: float
    inventory_capacity: float

    @classmethod
    def from_instance(cls, instance: Instance, retailer: int) -> "RetailerAgent":
        return cls(
            retailer=retailer,
            holding_cost=float(instance.inventory_cost[retailer]),
            demand=tuple(float(x) for x in instance.demand[retailer]),
            initial_inventory=float(instance.initial_inventory[retailer]),
            inventory_capacity=float(instance.inventory_capacity[retailer]),
        )

    def view(self, state: PlanState) -> RetailerView:
        return project(state, self.retailer, self.holding_cost, self.demand)

    def utility(self, state: PlanState) -> UtilityReport:
        return total_utility(self.view(state))

    def delta(self, before: PlanState, after: PlanState, periods=None) -> float:
        return delta_utility(self.view(before), self.view(after), periods)

    def decide(self, delta: float) -> bool:
        return retailer_decide(delta)

    def delivery_preferences(self, depth: int = 5) -> list[DeliveryPattern]:
        return delivery_preferences(self, depth)


def delivery_preferences(agent: RetailerAgent, depth: int = 5) -> list[DeliveryPattern]:
    """Top ``depth`` delivery patterns, cheapest own holding first.

    Ties go to fewer delivery periods, then to later deliveries.
    """
    if sum(agent.demand) < 1:
        raise InstanceError("retailer has zero total demand", "d", agent.retailer)
    pats = enumerate_patterns(agent.demand, agent.initial_inventory, agent.inventory_capacity, agent.holding_cost)
    if not pats:
        raise InstanceError("no delivery pattern fits the inventory capacity", "L", agent.retailer)
    return rank_patterns(pats)[: max(1, depth)]
