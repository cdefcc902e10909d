"""Transactions, joint-outcome negotiation, voting and the planning board.

A transaction is a set of delivery moves. For each yes/no vector over its
moves (an *outcome*) the negotiators report their utility delta; the chosen
outcome then goes to a vote among every retailer whose neighbourhood
membership changes.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from .agents import RetailerAgent, SupplierView, retailer_decide
from .costs import PlanState, derive_state, lot_for_lot_production, simulate_inventory
from .feasibility import Constraint, Violation, check_feasibility, quantities_feasible
from .model import EPS, Plan
from .routing import RouteBuilder, assign_vehicles

Outcome = tuple[bool, ...]


class Kind(str, Enum):
    Removal = "Removal"
    Insertion = "Insertion"
    Substitution = "Substitution"


class Status(str, Enum):
    accepted = "accepted"
    rejected_negotiation = "rejected_negotiation"
    rejected_vote = "rejected_vote"
    stale = "stale"


class TransactionAborted(RuntimeError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__(f"post-move plan infeasible: {[v.constraint.value for v in self.violations]}")


@dataclass(frozen=True)
class Move:
    retailer: int
    from_period: int
    to_period: int
    qty: float

    def to_dict(self) -> dict:
        return {"retailer": self.retailer, "from": self.from_period, "to": self.to_period, "qty": self.qty}

    @classmethod
    def from_dict(cls, doc) -> "Move":
        return cls(int(doc["retailer"]), int(doc["from"]), int(doc["to"]), float(doc["qty"]))


@dataclass(frozen=True)
class Transaction:
    kind: Kind
    moves: tuple[Move, ...]
    estimated_savings: float = 0.0

    @property
    def negotiators(self) -> tuple[int, ...]:
        return tuple(sorted({m.retailer for m in self.moves}))

    @property
    def periods(self) -> tuple[int, ...]:
        return tuple(sorted({p for m in self.moves for p in (m.from_period, m.to_period)}))

    def sort_key(self):
        order = {Kind.Removal: 0, Kind.Insertion: 1, Kind.Substitution: 2}
        moves = tuple((m.retailer, m.from_period, m.to_period) for m in self.moves)
        return (-round(self.estimated_savings, 9), order[self.kind], moves)


def classify_move(deliveries: np.ndarray, move: Move) -> Kind | None:
    """Kind of a single move against a ``(n+1, T)`` delivery matrix, or ``None`` if invalid."""
    i, s, t = move.retailer, move.from_period - 1, move.to_period - 1
    if s == t or move.qty <= EPS or not (0 <= s < deliveries.shape[1] and 0 <= t < deliveries.shape[1]):
        return None
    have = deliveries[i, s]
    if have <= EPS or move.qty > have + EPS:
        return None
    if deliveries[i, t] > EPS:
        # Removals empty the source period into an existing delivery.
        return Kind.Removal if abs(move.qty - have) <= EPS else None
    return Kind.Insertion


def transaction_is_valid(deliveries: np.ndarray, txn: Transaction) -> bool:
    kinds = [classify_move(deliveries, m) for m in txn.moves]
    if any(k is None for k in kinds):
        return False
    if txn.kind is Kind.Substitution:
        return len(txn.moves) == 2 and txn.moves[0].retailer != txn.moves[1].retailer
    return len(txn.moves) == 1 and kinds[0] is txn.kind


def _routes_for_period(view, q: np.ndarray, period: int, builder: RouteBuilder):
    served = {i: float(q[i, period - 1]) for i in range(1, q.shape[0]) if q[i, period - 1] > EPS}
    return assign_vehicles(served, view.vehicle_capacity, view.n_vehicles, builder, period)


def build_plan(
    view,
    q: np.ndarray,
    builder: RouteBuilder,
    base: Plan | None = None,
    periods: Sequence[int] | None = None,
) -> Plan | None:
    """Plan for delivery matrix ``q``; ``None`` if it cannot be made feasible.

    With ``base``, routes outside ``periods`` are kept and the base production
    plan is reused whenever supplier stock still covers the new timing.
    """
    T = view.horizon
    redo = set(range(1, T + 1)) if base is None or periods is None else set(periods)
    deliveries: dict = {}
    routes: dict = {}
    if base is not None:
        for (i, k, t), qty in base.deliveries.items():
            if t not in redo:
                deliveries[(i, k, t)] = qty
        for (k, t), nodes in base.routes.items():
            if t not in redo:
                routes[(k, t)] = nodes
    for t in sorted(redo):
        rts = _routes_for_period(view, q, t, builder)
        if rts is None:
            return None
        for r in rts:
            routes[(r.vehicle, t)] = r.nodes
            for i in r.retailers:
                deliveries[(i, r.vehicle, t)] = float(q[i, t - 1])
    production = None
    if base is not None:
        ship = q[1:].sum(axis=0)
        level = float(view.initial_inventory[0]) + np.cumsum(np.asarray(base.production_qty) - ship)
        if np.all(level >= -EPS) and np.all(level <= view.inventory_capacity[0] + EPS):
            production = (base.production_qty, base.production_flag)
    if production is None:
        production = lot_for_lot_production(view, q[1:].sum(axis=0))
        if production is None:
            return None
    if not quantities_feasible(view, q, *production):
        return None
    return Plan(deliveries, routes, *production)


def apply_moves(view, plan: Plan, moves: Sequence[Move], builder: RouteBuilder) -> Plan | None:
    q = plan.delivery_matrix(view.n_retailers)
    for m in moves:
        q[m.retailer, m.from_period - 1] -= m.qty
        q[m.retailer, m.to_period - 1] += m.qty
    q[np.abs(q) < EPS] = 0.0
    if np.any(q < 0):
        return None
    periods = sorted({p for m in moves for p in (m.from_period, m.to_period)})
    return build_plan(view, q, builder, base=plan, periods=periods)


@dataclass(frozen=True, eq=False)
class PlanningBoard:
    view: SupplierView
    initial: Plan
    current: Plan
    revision: int = 0

    @classmethod
    def start(cls, view: SupplierView, plan: Plan) -> "PlanningBoard":
        return cls(view.with_plan(plan), plan, plan, 0)

    @property
    def state(self) -> PlanState:
        return derive_state(self.view, self.current)

    def projection(self, agent: RetailerAgent):
        """The retailer's redacted slice of the current plan."""
        return agent.view(self.state)


def voter_set(before: PlanState, after: PlanState, negotiators: Sequence[int] = ()) -> frozenset[int]:
    """Negotiators plus every retailer served in a period whose membership changes."""
    voters = set(negotiators)
    for t in range(1, before.horizon + 1):
        nb0, nb1 = before.neighborhood(t), after.neighborhood(t)
        if nb0 != nb1:
            voters |= nb0 | nb1
    return frozenset(voters)


def outcome_label(outcome: Outcome) -> str:
    return "".join("Y" if x else "N" for x in outcome)


def negotiate_joint_outcome(
    moves: Sequence[Move],
    deltas: Mapping[Outcome, Mapping[int, float] | None],
) -> Outcome | None:
    """Pick the outcome the negotiators settle on, or ``None`` if none is admissible.

    ``deltas[outcome]`` maps each negotiator to its utility delta under that
    outcome (``None`` marks an infeasible outcome). An outcome is admissible
    when every retailer whose move it applies gains strictly; the admissible
    outcome with the largest negotiator delta sum wins, ties going to the
    lexicographically smallest set of applied retailer ids.
    """
    best, best_key = None, None
    for outcome in itertools.product((True, False), repeat=len(moves)):
        if not any(outcome):
            continue
        d = deltas.get(outcome)
        if d is None:
            continue
        applied = sorted({m.retailer for m, on in zip(moves, outcome) if on})
        if not all(retailer_decide(d[r]) for r in applied):
            continue
        key = (-round(sum(d.values()), 9), tuple(applied))
        if best_key is None or key < best_key:
            best, best_key = outcome, key
    return best


@dataclass(frozen=True)
class VoteRecord:
    deltas: tuple[tuple[int, float], ...]
    favor: int
    against: int
    supplier_tiebreak: bool | None
    result: bool

    @property
    def votes(self) -> dict[int, bool]:
        return {r: retailer_decide(d) for r, d in self.deltas}


def tally(deltas: Mapping[int, float], supplier_tiebreak_in_favor: bool) -> VoteRecord:
    if not deltas:
        raise ValueError("a vote needs at least one voter")
    ordered = tuple(sorted((int(r), float(d)) for r, d in deltas.items()))
    favor = sum(1 for _, d in ordered if retailer_decide(d))
    against = len(ordered) - favor
    tie = favor == against
    result = favor > against or (tie and supplier_tiebreak_in_favor)
    return VoteRecord(ordered, favor, against, supplier_tiebreak_in_favor if tie else None, result)


def tally_votes(deltas: Mapping[int, float], supplier_tiebreak_in_favor: bool) -> bool:
    return tally(deltas, supplier_tiebreak_in_favor).result


def supplier_tiebreak(before: PlanState, after: PlanState) -> bool:
    """The supplier sides with a change that does not raise its visible cost."""
    return after.supplier_visible_cost() <= before.supplier_visible_cost() + EPS


@dataclass
class TransactionResult:
    id: int
    transaction: Transaction
    status: Status
    negotiator_deltas: dict[Outcome, dict[int, float] | None] = field(default_factory=dict)
    chosen: Outcome | None = None
    voters: tuple[int, ...] = ()
    vote: VoteRecord | None = None
    revision: int = 0
    round: int = 0

    @property
    def accepted(self) -> bool:
        return self.status is Status.accepted

    @property
    def applied_moves(self) -> tuple[Move, ...]:
        if self.chosen is None:
            return ()
        return tuple(m for m, on in zip(self.transaction.moves, self.chosen) if on)

    def to_record(self) -> dict:
        txn = self.transaction
        return {
            "type": "transaction",
            "id": self.id,
            "round": self.round,
            "kind": txn.kind.value,
            "moves": [m.to_dict() for m in txn.moves],
            "estimated_savings": txn.estimated_savings,
            "negotiator_deltas": {
                outcome_label(o): (None if d is None else {str(r): v for r, v in sorted(d.items())})
                for o, d in self.negotiator_deltas.items()
            },
            "chosen_outcome": None if self.chosen is None else outcome_label(self.chosen),
            "voters": list(self.voters),
            "voter_deltas": None if self.vote is None else {str(r): d for r, d in self.vote.deltas},
            "tally": None if self.vote is None else {"favor": self.vote.favor, "against": self.vote.against},
            "tiebreak": None if self.vote is None else self.vote.supplier_tiebreak,
            "accepted": self.accepted,
            "status": self.status.value,
            "revision": self.revision,
        }


def resolve(
    txn: Transaction,
    before: PlanState,
    outcome_states: Mapping[Outcome, PlanState | None],
    agents: Mapping[int, RetailerAgent],
    txn_id: int = 0,
    revision: int = 0,
    tiebreak: Callable[[PlanState, PlanState], bool] = supplier_tiebreak,
) -> TransactionResult:
    """Negotiate and vote on ``txn`` given the state each outcome would produce.

    Does not touch any board: on acceptance ``revision`` is reported as the
    revision the change would create.
    """
    negotiators = txn.negotiators
    deltas: dict[Outcome, dict[int, float] | None] = {}
    for outcome in itertools.product((True, False), repeat=len(txn.moves)):
        if not any(outcome):
            continue
        after = outcome_states.get(outcome)
        deltas[outcome] = None if after is None else {r: agents[r].delta(before, after) for r in negotiators}
    chosen = negotiate_joint_outcome(txn.moves, deltas)
    if chosen is None:
        return TransactionResult(txn_id, txn, Status.rejected_negotiation, deltas, revision=revision)
    after = outcome_states[chosen]
    voters = voter_set(before, after, negotiators)
    voter_deltas = {r: (deltas[chosen][r] if r in deltas[chosen] else agents[r].delta(before, after)) for r in sorted(voters)}
    record = tally(voter_deltas, tiebreak(before, after))
    status = Status.accepted if record.result else Status.rejected_vote
    return TransactionResult(
        txn_id,
        txn,
        status,
        deltas,
        chosen,
        tuple(sorted(voters)),
        record,
        revision + 1 if record.result else revision,
    )


def apply_transaction(
    board: PlanningBoard,
    moves: Sequence[Move],
    builder: RouteBuilder | None = None,
) -> PlanningBoard:
    """Apply the agreed moves and bump the revision.

    Raises ``TransactionAborted`` (board untouched) if the result is infeasible.
    """
    if not moves:
        return board
    builder = builder or RouteBuilder(board.view.transport_cost)
    plan = apply_moves(board.view, board.current, moves, builder)
    if plan is None:
        q = board.current.delivery_matrix(board.view.n_retailers)
        raise TransactionAborted(_explain(board.view, board.current, q, moves))
    violations = check_feasibility(board.view, plan)
    if violations:  # pragma: no cover - build_plan routes are well-formed by construction
        raise TransactionAborted(violations)
    return PlanningBoard(board.view.with_plan(plan), board.initial, plan, board.revision + 1)


def _explain(view, plan: Plan, q: np.ndarray, moves) -> list[Violation]:
    # Best-effort diagnosis for an aborted transaction: simulate the raw move.
    for m in moves:
        q[m.retailer, m.from_period - 1] -= m.qty
        q[m.retailer, m.to_period - 1] += m.qty
    raw = Plan(
        {(i, 1, t + 1): q[i, t] for i in range(1, q.shape[0]) for t in range(q.shape[1]) if q[i, t] > EPS},
        {},
        plan.production_qty,
        plan.production_flag,
    )
    inv = simulate_inventory(view, raw)
    out = [
        Violation(Constraint.FlowBalanceRetailer, int(i), None, int(t) + 1, float(-inv[i, t]))
        for i, t in np.argwhere(inv[1:] < -EPS) + np.array([1, 0])
    ]
    return out or [Violation(Constraint.Domain, None, None, None, 1.0)]


def outcome_plans(board: PlanningBoard, txn: Transaction, builder: RouteBuilder) -> dict[Outcome, Plan | None]:
    out = {}
    for outcome in itertools.product((True, False), repeat=len(txn.moves)):
        if not any(outcome):
            continue
        moves = [m for m, on in zip(txn.moves, outcome) if on]
        out[outcome] = apply_moves(board.view, board.current, moves, builder)
    return out


def run_transaction(
    board: PlanningBoard,
    txn: Transaction,
    agents: Mapping[int, RetailerAgent],
    builder: RouteBuilder,
    txn_id: int = 0,
) -> tuple[TransactionResult, PlanningBoard]:
    """Process one transaction-pool entry against the board."""
    q = board.current.delivery_matrix(board.view.n_retailers)
    if not transaction_is_valid(q, txn):
        return TransactionResult(txn_id, txn, Status.stale, revision=board.revision), board
    plans = outcome_plans(board, txn, builder)
    before = board.state
    states = {o: (None if p is None else derive_state(board.view, p)) for o, p in plans.items()}
    result = resolve(txn, before, states, agents, txn_id, board.revision)
    if not result.accepted:
        return result, board
    new_board = apply_transaction(board, result.applied_moves, builder)
    if new_board.current != plans[result.chosen]:  # pragma: no cover - determinism guard
        raise RuntimeError("applied plan differs from the negotiated outcome plan")
    return result, new_board
