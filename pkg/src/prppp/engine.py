"""The coordination loop: preferences, initial plan, agenda rounds, trace and replay."""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._accel import worker_count
from .agents import DeliveryPattern, RetailerAgent, SupplierView
from .costs import supplier_visible_cost
from .feasibility import check_feasibility
from .model import EPS, Instance, Plan, plan_from_dict
from .protocol import (
    Kind,
    Move,
    PlanningBoard,
    Status,
    Transaction,
    TransactionResult,
    apply_moves,
    apply_transaction,
    build_plan,
    classify_move,
    run_transaction,
)
from .routing import RouteBuilder, assign_vehicles

log = logging.getLogger(__name__)

SUBSTITUTION_POOL = 8


class InfeasibleInstanceError(RuntimeError):
    """No combination of retailer preferences yields a feasible initial plan."""


@dataclass(frozen=True)
class EngineConfig:
    max_rounds: int = 50
    agenda_size: int = 20
    stall_rounds: int = 1
    preference_depth: int = 5
    seed: int = 0  # recorded in traces; every engine choice is deterministic, so it has no effect yet

    def __post_init__(self):
        for name in ("max_rounds", "agenda_size", "stall_rounds", "preference_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EngineConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**{k: int(v) for k, v in doc.items()})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Agenda:
    transactions: tuple[Transaction, ...]

    def __iter__(self):
        return iter(self.transactions)

    def __len__(self):
        return len(self.transactions)

    def to_records(self) -> list[dict]:
        return [
            {"kind": t.kind.value, "moves": [m.to_dict() for m in t.moves], "estimated_savings": t.estimated_savings}
            for t in self.transactions
        ]


@dataclass(frozen=True)
class RoundSummary:
    round: int
    proposed: int
    accepted: int


# -- initial solution ---------------------------------------------------------


def _pattern_matrix(view, prefs: Mapping[int, Sequence[DeliveryPattern]], choice: Mapping[int, int]) -> np.ndarray:
    q = np.zeros((view.n_retailers + 1, view.horizon))
    for i in view.retailers:
        q[i] = prefs[i][choice[i]].quantities
    return q


def _fits_own_cap(view, q: np.ndarray, i: int) -> bool:
    inv = view.initial_inventory[i] + np.cumsum(q[i] - view.demand[i])
    start = np.concatenate([[view.initial_inventory[i]], inv[:-1]])
    return bool(np.all(inv >= -EPS) and np.all(start + q[i] <= view.inventory_capacity[i] + EPS))


def _assignable(view, q: np.ndarray, t: int, builder: RouteBuilder) -> bool:
    served = {i: float(q[i, t - 1]) for i in view.retailers if q[i, t - 1] > EPS}
    return assign_vehicles(served, view.vehicle_capacity, view.n_vehicles, builder, t) is not None


def _repair_vehicles(view, q: np.ndarray, builder: RouteBuilder) -> np.ndarray | None:
    """Advance the smallest deliveries of overloaded periods to the nearest earlier period that takes them."""
    q = q.copy()
    for t in view.periods:
        while not _assignable(view, q, t, builder):
            served = sorted((q[i, t - 1], i) for i in view.retailers if q[i, t - 1] > EPS)
            moved = False
            for qty, i in served:
                for s in range(t - 1, 0, -1):
                    trial = q.copy()
                    trial[i, s - 1] += qty
                    trial[i, t - 1] = 0.0
                    if _fits_own_cap(view, trial, i) and _assignable(view, trial, s, builder):
                        q = trial
                        moved = True
                        break
                if moved:
                    break
            if not moved:
                return None
    return q


def initial_solution(
    view: SupplierView,
    preferences: Mapping[int, Sequence[DeliveryPattern]],
    builder: RouteBuilder | None = None,
) -> Plan:
    """First-preference plan, repaired for vehicle capacity when needed.

    If repair fails, retailers fall back to their next preference one at a
    time in index order until a feasible plan appears.
    """
    builder = builder or RouteBuilder(view.transport_cost)
    choice = {i: 0 for i in view.retailers}
    cursor = 0
    retailers = list(view.retailers)
    while True:
        q = _repair_vehicles(view, _pattern_matrix(view, preferences, choice), builder)
        if q is not None:
            plan = build_plan(view, q, builder)
            if plan is not None and not check_feasibility(view, plan):
                return plan
        for step in range(len(retailers)):
            i = retailers[(cursor + step) % len(retailers)]
            if choice[i] + 1 < len(preferences[i]):
                choice[i] += 1
                cursor = (cursor + step + 1) % len(retailers)
                break
        else:
            raise InfeasibleInstanceError("no feasible initial plan within the preference depth")


# -- agenda -------------------------------------------------------------------


def _estimate(view: SupplierView, base_cost: float, moves: Sequence[Move], builder: RouteBuilder):
    plan = apply_moves(view, view.plan, moves, builder)
    if plan is None:
        return None
    return base_cost - supplier_visible_cost(view, plan)


def _parallel_map(fn, items: list) -> list:
    workers = worker_count()
    if workers <= 1 or len(items) < 64:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def single_moves(view: SupplierView) -> list[tuple[Kind, Move]]:
    """Every full-delivery move of one retailer between two periods."""
    q = view.plan.delivery_matrix(view.n_retailers)
    out = []
    for i in view.retailers:
        for t in view.periods:
            if q[i, t - 1] <= EPS:
                continue
            for s in view.periods:
                if s == t:
                    continue
                move = Move(i, t, s, float(q[i, t - 1]))
                kind = classify_move(q, move)
                if kind is not None:
                    out.append((kind, move))
    return out


def propose_agenda(view: SupplierView, config: EngineConfig, builder: RouteBuilder | None = None) -> Agenda:
    """Rank candidate transactions by the supplier's own estimated savings.

    Reads only ``view``: routing and production effects, never retailer
    holding costs.
    """
    builder = builder or RouteBuilder(view.transport_cost)
    base = supplier_visible_cost(view, view.plan)
    candidates = single_moves(view)
    savings = _parallel_map(lambda c: _estimate(view, base, (c[1],), builder), candidates)
    keep: list[Transaction] = []
    rejected: list[Transaction] = []
    feasible: list[Transaction] = []
    for (kind, move), est in zip(candidates, savings):
        if est is None:
            continue
        txn = Transaction(kind, (move,), est)
        feasible.append(txn)
        (keep if est > EPS else rejected).append(txn)

    # Substitutions pair a rejected move with another retailer's move that
    # touches one of the same periods.
    rejected.sort(key=Transaction.sort_key)
    partners = sorted(feasible, key=Transaction.sort_key)[: 2 * SUBSTITUTION_POOL]
    pairs = []
    seen = set()
    for a in rejected[:SUBSTITUTION_POOL]:
        for b in partners:
            ma, mb = a.moves[0], b.moves[0]
            if ma.retailer == mb.retailer or not set(a.periods) & set(b.periods):
                continue
            moves = tuple(sorted((ma, mb), key=lambda m: m.retailer))
            if moves in seen:
                continue
            seen.add(moves)
            pairs.append(moves)
    sub_savings = _parallel_map(lambda mv: _estimate(view, base, mv, builder), pairs)
    for moves, est in zip(pairs, sub_savings):
        if est is not None and est > EPS:
            keep.append(Transaction(Kind.Substitution, moves, est))
    keep.sort(key=Transaction.sort_key)
    return Agenda(tuple(keep[: config.agenda_size]))


def stopping_criterion(rounds: Sequence[RoundSummary], config: EngineConfig) -> bool:
    if len(rounds) >= config.max_rounds:
        return True
    tail = rounds[-config.stall_rounds :]
    return len(tail) == config.stall_rounds and all(r.accepted == 0 for r in tail)


# -- trace --------------------------------------------------------------------


def plan_digest(plan: Plan) -> str:
    return hashlib.sha256(plan.to_json().encode()).hexdigest()


@dataclass
class Trace:
    fingerprint: str
    config: EngineConfig
    initial_plan: Plan
    transactions: list[TransactionResult] = field(default_factory=list)
    rounds: list[RoundSummary] = field(default_factory=list)
    final_revision: int | None = None
    final_digest: str | None = None

    def records(self) -> list[dict]:
        out = [
            {
                "type": "header",
                "fingerprint": self.fingerprint,
                "config": self.config.to_dict(),
                "initial_plan": self.initial_plan.to_dict(),
            }
        ]
        for r in self.transactions:
            out.append(r.to_record())
        if self.final_revision is not None:
            out.append(
                {
                    "type": "end",
                    "rounds": [asdict(r) for r in self.rounds],
                    "revision": self.final_revision,
                    "plan_sha256": self.final_digest,
                }
            )
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.records())


@dataclass
class ParsedTrace:
    fingerprint: str
    config: dict
    initial_plan: Plan
    transactions: list[dict]
    end: dict | None


def parse_trace(lines: Iterable[str]) -> ParsedTrace:
    header, txns, end = None, [], None
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError:
            break  # a cut-off final line counts as truncation
        kind = rec.get("type")
        if kind == "header":
            header = rec
        elif kind == "transaction":
            txns.append(rec)
        elif kind == "end":
            end = rec
    if header is None:
        raise ValueError("trace has no header record")
    return ParsedTrace(header["fingerprint"], header["config"], plan_from_dict(header["initial_plan"]), txns, end)


@dataclass
class ReplayResult:
    plan: Plan
    revision: int
    complete: bool
    digest_ok: bool | None


def replay(instance: Instance, trace: ParsedTrace) -> ReplayResult:
    """Re-apply every accepted transaction of ``trace`` to its initial plan."""
    if trace.fingerprint != instance.fingerprint():
        raise FingerprintMismatch(trace.fingerprint, instance.fingerprint())
    view = SupplierView.redact(instance)
    builder = RouteBuilder(view.transport_cost)
    board = PlanningBoard.start(view, trace.initial_plan)
    for rec in trace.transactions:
        if not rec["accepted"]:
            continue
        moves = [Move.from_dict(m) for m, on in zip(rec["moves"], rec["chosen_outcome"]) if on == "Y"]
        board = apply_transaction(board, moves, builder)
        if board.revision != rec["revision"]:
            raise ValueError(f"revision drift at transaction {rec['id']}: {board.revision} != {rec['revision']}")
    complete = trace.end is not None
    digest_ok = None
    if complete:
        digest_ok = board.revision == trace.end["revision"] and plan_digest(board.current) == trace.end["plan_sha256"]
    return ReplayResult(board.current, board.revision, complete, digest_ok)


class FingerprintMismatch(ValueError):
    def __init__(self, expected: str, got: str):
        super().__init__(f"trace is for instance {expected[:12]}..., got {got[:12]}...")


# -- main loop ----------------------------------------------------------------


def retailer_agents(instance: Instance) -> dict[int, RetailerAgent]:
    return {i: RetailerAgent.from_instance(instance, i) for i in instance.retailers}


def improve(instance: Instance, config: EngineConfig | None = None) -> tuple[Plan, Trace]:
    """Run preferences, initial solution and agenda rounds until the stopping rule fires."""
    config = config or EngineConfig()
    agents = retailer_agents(instance)
    prefs = {i: a.delivery_preferences(config.preference_depth) for i, a in agents.items()}
    view = SupplierView.redact(instance)
    builder = RouteBuilder(view.transport_cost)
    initial = initial_solution(view, prefs, builder)
    board = PlanningBoard.start(view, initial)
    trace = Trace(instance.fingerprint(), config, initial)
    next_id = 1
    while not stopping_criterion(trace.rounds, config):
        number = len(trace.rounds) + 1
        agenda = propose_agenda(board.view, config, builder)
        accepted = 0
        for txn in agenda:
            result, board = run_transaction(board, txn, agents, builder, next_id)
            result.round = number
            next_id += 1
            if result.status is Status.stale:
                log.debug("round %d: skipped stale transaction %s", number, txn)
            if result.accepted:
                accepted += 1
                if check_feasibility(board.view, board.current):  # pragma: no cover - guarded in protocol
                    raise AssertionError("accepted transaction produced an infeasible plan")
            trace.transactions.append(result)
        trace.rounds.append(RoundSummary(number, len(agenda), accepted))
    trace.final_revision = board.revision
    trace.final_digest = plan_digest(board.current)
    return board.current, trace
