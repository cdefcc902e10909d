"""Negotiated production routing with private retailer holding costs."""
from .agents import RetailerAgent, SupplierView, delivery_preferences, delta_utility, retailer_decide, total_utility
from .costs import (
    PlanState,
    derive_state,
    evaluate_global_cost,
    lot_for_lot_production,
    simulate_inventory,
    supplier_visible_cost,
)
from .engine import EngineConfig, improve, initial_solution, propose_agenda, stopping_criterion
from .feasibility import Constraint, Violation, check_feasibility
from .model import Instance, InstanceError, Plan, generate_instance, load_instance, load_plan
from .oracle import optimality_gap, solve_exact
from .protocol import (
    Kind,
    Move,
    PlanningBoard,
    Transaction,
    apply_transaction,
    negotiate_joint_outcome,
    tally_votes,
    voter_set,
)
from .routing import assign_vehicles, solve_tsp_exact, solve_tsp_heuristic

__version__ = "0.1.0"
