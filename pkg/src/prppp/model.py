"""Problem data and solution containers, JSON I/O and the instance generator.

Conventions used across the package: node 0 is the supplier, retailers are
1..n; periods and vehicles are 1-based in every mapping key and in JSON, while
per-period numpy arrays are 0-based (column ``t - 1`` holds period ``t``).
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Mapping

import numpy as np

log = logging.getLogger(__name__)

EPS = 1e-9


class InstanceError(ValueError):
    """Raised when an instance document is malformed or violates an invariant."""

    def __init__(self, message: str, field: str | None = None, index: Any = None):
        self.field = field
        self.index = index
        where = ""
        if field is not None:
            where = f" [{field}" + (f"[{index}]" if index is not None else "") + "]"
        super().__init__(message + where)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def round_half_up(value: float, places: int = 2) -> float:
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(q, rounding=ROUND_HALF_UP))


def euclidean_costs(coords: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Symmetric arc costs ``round_half_up(scale * distance, 2)``."""
    pts = np.asarray(coords, dtype=np.float64)
    n = pts.shape[0]
    c = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist = math.hypot(pts[i, 0] - pts[j, 0], pts[i, 1] - pts[j, 1])
            c[i, j] = c[j, i] = round_half_up(scale * dist, 2)
    return c


@dataclass(frozen=True, eq=False)
class Instance:
    n_retailers: int
    horizon: int
    n_vehicles: int
    unit_production_cost: float
    setup_cost: float
    inventory_cost: np.ndarray  # (n+1,), entries 1..n private
    demand: np.ndarray  # (n+1, T), row 0 is zero
    transport_cost: np.ndarray  # (n+1, n+1)
    production_capacity: float
    vehicle_capacity: float
    inventory_capacity: np.ndarray  # (n+1,)
    initial_inventory: np.ndarray  # (n+1,)
    coordinates: np.ndarray | None = None
    scale: float = 1.0

    def __post_init__(self):
        for name in ("inventory_cost", "demand", "transport_cost", "inventory_capacity", "initial_inventory"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.coordinates is not None:
            object.__setattr__(self, "coordinates", _frozen(self.coordinates))
        self._validate()

    @property
    def nodes(self) -> range:
        return range(self.n_retailers + 1)

    @property
    def retailers(self) -> range:
        return range(1, self.n_retailers + 1)

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    @property
    def supplier_inventory_cost(self) -> float:
        return float(self.inventory_cost[0])

    def _validate(self) -> None:
        n, T = self.n_retailers, self.horizon
        if n < 1:
            raise InstanceError("need at least one retailer", "n_retailers")
        if T < 1:
            raise InstanceError("need at least one period", "horizon")
        if self.n_vehicles < 1:
            raise InstanceError("need at least one vehicle", "n_vehicles")
        shapes = {
            "h": (self.inventory_cost, (n + 1,)),
            "d": (self.demand, (n + 1, T)),
            "c": (self.transport_cost, (n + 1, n + 1)),
            "L": (self.inventory_capacity, (n + 1,)),
            "I0": (self.initial_inventory, (n + 1,)),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                raise InstanceError(f"expected shape {shape}, got {arr.shape}", name)
            if not np.all(np.isfinite(arr)):
                raise InstanceError("non-finite entry", name)
        for name, value in (("u", self.unit_production_cost), ("f", self.setup_cost)):
            if not value >= 0:
                raise InstanceError("must be nonnegative", name)
        for name, value in (("C", self.production_capacity), ("Q", self.vehicle_capacity)):
            if not value > 0:
                raise InstanceError("must be positive", name)
        for name, arr in (("h", self.inventory_cost), ("I0", self.initial_inventory)):
            bad = np.flatnonzero(arr < 0)
            if bad.size:
                raise InstanceError("must be nonnegative", name, int(bad[0]))
        bad = np.flatnonzero(self.inventory_capacity <= 0)
        if bad.size:
            raise InstanceError("must be positive", "L", int(bad[0]))
        d = self.demand
        if np.any(d[0] != 0):
            raise InstanceError("supplier row of demand must be zero", "d", 0)
        if np.any(d < 0) or np.any(d != np.round(d)):
            i, t = np.argwhere((d < 0) | (d != np.round(d)))[0]
            raise InstanceError("demand must be a nonnegative integer", "d", (int(i), int(t) + 1))
        c = self.transport_cost
        if np.any(c < 0):
            raise InstanceError("transport cost must be nonnegative", "c")
        if np.any(np.diag(c) != 0):
            raise InstanceError("transport cost diagonal must be zero", "c")
        if not np.array_equal(c, c.T):
            i, j = np.argwhere(c != c.T)[0]
            raise InstanceError("transport cost must be symmetric", "c", (int(i), int(j)))
        over = np.flatnonzero(self.initial_inventory > self.inventory_capacity + EPS)
        if over.size:
            i = int(over[0])
            tag = "SupplierInventoryCap" if i == 0 else "RetailerInventoryCap"
            raise InstanceError(f"{tag}: initial inventory exceeds capacity", "I0", i)
        for i in self.retailers:
            if d[i].sum() < 1:
                raise InstanceError("retailer has zero total demand", "d", i)

    def to_dict(self) -> dict:
        doc = {
            "n_retailers": self.n_retailers,
            "horizon": self.horizon,
            "n_vehicles": self.n_vehicles,
            "u": self.unit_production_cost,
            "f": self.setup_cost,
            "h": self.inventory_cost.tolist(),
            "d": [[int(x) for x in row] for row in self.demand[1:]],
            "C": self.production_capacity,
            "Q": self.vehicle_capacity,
            "L": self.inventory_capacity.tolist(),
            "I0": self.initial_inventory.tolist(),
        }
        if self.coordinates is not None:
            doc["coords"] = self.coordinates.tolist()
            doc["scale"] = self.scale
        else:
            doc["c"] = self.transport_cost.tolist()
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def fingerprint(self) -> str:
        # Always hash the resolved cost matrix so coords- and matrix-encoded
        # copies of the same problem share a fingerprint.
        doc = self.to_dict()
        doc.pop("coords", None)
        doc.pop("scale", None)
        doc["c"] = self.transport_cost.tolist()
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_inventory_cost(self, retailer: int, value: float) -> "Instance":
        h = self.inventory_cost.copy()
        h[retailer] = value
        return replace(self, inventory_cost=h)


_REQUIRED = ("n_retailers", "horizon", "n_vehicles", "u", "f", "h", "d", "C", "Q", "L", "I0")
_OPTIONAL = ("coords", "c", "scale")


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    if not isinstance(doc, Mapping):
        raise InstanceError("instance document must be a JSON object")
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise InstanceError(f"missing keys {missing}")
    unknown = sorted(set(doc) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise InstanceError(f"unknown keys {unknown}")
    if ("coords" in doc) == ("c" in doc):
        raise InstanceError("exactly one of 'coords' or 'c' is required")
    for key in ("n_retailers", "horizon", "n_vehicles"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise InstanceError("must be an integer", key)
    n, T = doc["n_retailers"], doc["horizon"]
    if n < 1:
        raise InstanceError("need at least one retailer", "n_retailers")
    if T < 1:
        raise InstanceError("need at least one period", "horizon")
    try:
        d = np.asarray(doc["d"], dtype=np.float64)
        if d.shape != (n, T):
            raise InstanceError(f"expected shape {(n, T)}, got {d.shape}", "d")
        demand = np.vstack([np.zeros((1, T)), d])
        scale = float(doc.get("scale", 1.0))
        coords = None
        if "coords" in doc:
            coords = np.asarray(doc["coords"], dtype=np.float64)
            if coords.shape != (n + 1, 2):
                raise InstanceError(f"expected shape {(n + 1, 2)}, got {coords.shape}", "coords")
            if not scale > 0:
                raise InstanceError("must be positive", "scale")
            cost = euclidean_costs(coords, scale)
        else:
            cost = np.asarray(doc["c"], dtype=np.float64)
        return Instance(
            n_retailers=n,
            horizon=T,
            n_vehicles=doc["n_vehicles"],
            unit_production_cost=float(doc["u"]),
            setup_cost=float(doc["f"]),
            inventory_cost=np.asarray(doc["h"], dtype=np.float64),
            demand=demand,
            transport_cost=cost,
            production_capacity=float(doc["C"]),
            vehicle_capacity=float(doc["Q"]),
            inventory_capacity=np.asarray(doc["L"], dtype=np.float64),
            initial_inventory=np.asarray(doc["I0"], dtype=np.float64),
            coordinates=coords,
            scale=scale,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"malformed numeric data: {exc}") from exc


def load_instance(document: str | bytes | Mapping[str, Any]) -> Instance:
    """Parse and validate an instance JSON document (text or decoded mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"invalid JSON: {exc}") from exc
    return instance_from_dict(document)


@dataclass(frozen=True, eq=False)
class Plan:
    """A full solution. Zero deliveries and empty routes are dropped on construction.

    ``deliveries`` maps ``(retailer, vehicle, period)`` to a quantity and
    ``routes`` maps ``(vehicle, period)`` to a node tuple ``(0, ..., 0)``.
    """

    deliveries: Mapping[tuple[int, int, int], float]
    routes: Mapping[tuple[int, int], tuple[int, ...]]
    production_qty: tuple[float, ...]
    production_flag: tuple[bool, ...]

    def __post_init__(self):
        dl = {tuple(int(x) for x in k): float(q) for k, q in self.deliveries.items() if q != 0}
        rt = {tuple(int(x) for x in k): tuple(int(v) for v in nodes) for k, nodes in self.routes.items()}
        rt = {k: v for k, v in rt.items() if len(v) > 2 or any(x != 0 for x in v)}
        object.__setattr__(self, "deliveries", dict(sorted(dl.items())))
        object.__setattr__(self, "routes", dict(sorted(rt.items())))
        object.__setattr__(self, "production_qty", tuple(float(p) for p in self.production_qty))
        object.__setattr__(self, "production_flag", tuple(bool(y) for y in self.production_flag))

    @classmethod
    def empty(cls, horizon: int) -> "Plan":
        return cls({}, {}, (0.0,) * horizon, (False,) * horizon)

    @property
    def horizon(self) -> int:
        return len(self.production_qty)

    def delivery_matrix(self, n_retailers: int) -> np.ndarray:
        """Per-node per-period delivered quantity, summed over vehicles."""
        q = np.zeros((n_retailers + 1, self.horizon))
        for (i, _k, t), qty in self.deliveries.items():
            q[i, t - 1] += qty
        return q

    def members(self, period: int) -> frozenset[int]:
        return frozenset(i for (i, _k, t), qty in self.deliveries.items() if t == period and qty > 0)

    def to_dict(self) -> dict:
        return {
            "deliveries": [{"i": i, "k": k, "t": t, "q": q} for (i, k, t), q in self.deliveries.items()],
            "routes": [{"k": k, "t": t, "nodes": list(nodes)} for (k, t), nodes in self.routes.items()],
            "p": list(self.production_qty),
            "y": list(self.production_flag),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def __eq__(self, other):
        if not isinstance(other, Plan):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def plan_from_dict(doc: Mapping[str, Any]) -> Plan:
    try:
        deliveries: dict = {}
        for row in doc.get("deliveries", []):
            key = (int(row["i"]), int(row["k"]), int(row["t"]))
            deliveries[key] = deliveries.get(key, 0.0) + float(row["q"])
        routes = {(int(r["k"]), int(r["t"])): tuple(int(v) for v in r["nodes"]) for r in doc.get("routes", [])}
        return Plan(deliveries, routes, tuple(doc["p"]), tuple(bool(y) for y in doc["y"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed plan document: {exc}") from exc


def load_plan(document: str | bytes | Mapping[str, Any]) -> Plan:
    if isinstance(document, (str, bytes)):
        document = json.loads(document)
    return plan_from_dict(document)


@dataclass(frozen=True)
class Profile:
    """Parameter ranges for ``generate_instance``; integer ranges are inclusive."""

    demand: tuple[int, int] = (0, 15)
    holding: tuple[float, float] = (1.0, 5.0)
    supplier_holding: float = 1.0
    unit_cost: float = 8.0
    setup_cost: float = 500.0
    box: float = 100.0
    scale: float = 1.0
    n_vehicles: int = 1
    capacity_slack: float = 1.5
    inventory_slack: float = 2.0


def _clamp_profile(p: Profile, notes: list[str]) -> Profile:
    changes: dict = {}
    lo, hi = int(p.demand[0]), int(p.demand[1])
    if lo < 0:
        lo = 0
    if hi < max(lo, 1):
        hi = max(lo, 1)
    if (lo, hi) != tuple(p.demand):
        changes["demand"] = (lo, hi)
    hlo, hhi = max(0.0, p.holding[0]), max(0.0, p.holding[1])
    if hhi < hlo:
        hhi = hlo
    if (hlo, hhi) != tuple(p.holding):
        changes["holding"] = (hlo, hhi)
    for name, floor in (("supplier_holding", 0.0), ("unit_cost", 0.0), ("setup_cost", 0.0)):
        if getattr(p, name) < floor:
            changes[name] = floor
    for name in ("box", "scale"):
        if getattr(p, name) <= 0:
            changes[name] = 1.0
    if p.n_vehicles < 1:
        changes["n_vehicles"] = 1
    if p.capacity_slack < 1.0:
        changes["capacity_slack"] = 1.0
    if p.inventory_slack < 2.0:
        changes["inventory_slack"] = 2.0
    for key, value in changes.items():
        notes.append(f"profile.{key} clamped to {value!r}")
    return replace(p, **changes) if changes else p


def generate_instance(seed: int, n: int, horizon: int, profile: Profile | None = None) -> Instance:
    """Seeded random instance whose capacities admit the just-in-time plan."""
    notes: list[str] = []
    if n < 1:
        notes.append(f"n clamped from {n} to 1")
        n = 1
    if horizon < 1:
        notes.append(f"horizon clamped from {horizon} to 1")
        horizon = 1
    prof = _clamp_profile(profile or Profile(), notes)
    for note in notes:
        log.warning(note)

    rng = np.random.default_rng(seed)
    lo, hi = prof.demand
    d = rng.integers(lo, hi + 1, size=(n, horizon)).astype(np.float64)
    for i in range(n):
        if d[i].sum() < 1:
            d[i, rng.integers(0, horizon)] = max(1, hi)
    demand = np.vstack([np.zeros((1, horizon)), d])

    coords = np.round(rng.uniform(0.0, prof.box, size=(n + 1, 2)), 1)
    h = np.empty(n + 1)
    h[0] = prof.supplier_holding
    h[1:] = np.round(rng.uniform(prof.holding[0], prof.holding[1], size=n), 2)

    peak = float(d.sum(axis=0).max())
    C = float(math.ceil(prof.capacity_slack * peak))
    Q = float(math.ceil(prof.capacity_slack * peak))
    L = np.empty(n + 1)
    L[0] = float(d.sum())
    L[1:] = np.ceil(prof.inventory_slack * np.maximum(d.max(axis=1), 1.0))
    return Instance(
        n_retailers=n,
        horizon=horizon,
        n_vehicles=prof.n_vehicles,
        unit_production_cost=prof.unit_cost,
        setup_cost=prof.setup_cost,
        inventory_cost=h,
        demand=demand,
        transport_cost=euclidean_costs(coords, prof.scale),
        production_capacity=C,
        vehicle_capacity=Q,
        inventory_capacity=L,
        initial_inventory=np.zeros(n + 1),
        coordinates=coords,
        scale=prof.scale,
    )
