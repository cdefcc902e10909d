import itertools

import numpy as np
import pytest

from conftest import make_instance
from prppp.costs import evaluate_global_cost
from prppp.engine import improve
from prppp.feasibility import check_feasibility
from prppp.model import Instance, generate_instance
from prppp.oracle import OracleBoundsError, optimal_production, optimality_gap, solve_exact


def test_single_retailer_single_period():
    inst = make_instance([[0, 5], [5, 0]], [[4]], unit_production_cost=2.0, setup_cost=10.0)
    res = solve_exact(inst)
    assert res.cost == 2 * 4 + 10 + 10
    assert res.plan.routes == {(1, 1): (0, 1, 0)}


def test_merging_deliveries_when_routing_dominates():
    # Expensive trip, cheap holding: deliver both periods at once.
    inst = make_instance([[0, 100], [100, 0]], [[3, 3]], setup_cost=0.0, inventory_cost=np.array([0.0, 1.0]))
    res = solve_exact(inst)
    assert res.plan.delivery_matrix(1)[1].tolist() == [6, 0]
    assert res.cost == pytest.approx(6 + 3 + 200)


def test_splitting_when_holding_dominates():
    inst = make_instance([[0, 1], [1, 0]], [[3, 3]], setup_cost=0.0, inventory_cost=np.array([0.0, 50.0]))
    res = solve_exact(inst)
    assert res.plan.delivery_matrix(1)[1].tolist() == [3, 3]


def test_production_moves_only_for_setups():
    # One setup covering both periods beats two when f exceeds supplier holding.
    inst = make_instance([[0, 1], [1, 0]], [[5, 5]], setup_cost=100.0, inventory_cost=np.array([1.0, 50.0]))
    cost, p, y = optimal_production(inst, np.array([5.0, 5.0]))
    assert p == (10.0, 0.0) and y == (True, False)
    assert cost == 10 + 100 + 5


def test_production_infeasible():
    inst = make_instance([[0, 1], [1, 0]], [[60, 60]], production_capacity=50.0)
    assert optimal_production(inst, np.array([60.0, 60.0])) is None


def test_bounds():
    with pytest.raises(OracleBoundsError):
        solve_exact(generate_instance(0, 5, 2))
    with pytest.raises(OracleBoundsError):
        solve_exact(generate_instance(0, 2, 4))


def test_node_limit_marks_incomplete():
    res = solve_exact(generate_instance(11, 4, 3), max_nodes=3)
    assert not res.complete and res.nodes_explored == 3


@pytest.mark.parametrize("seed", range(25))
def test_plan_feasible_and_below_engine(seed):
    inst = generate_instance(seed, 1 + seed % 4, 1 + seed % 3)
    res = solve_exact(inst)
    assert check_feasibility(inst, res.plan) == []
    assert res.cost == pytest.approx(evaluate_global_cost(inst, res.plan))
    plan, _ = improve(inst)
    assert optimality_gap(inst, plan, res) >= -1e-9


def relabel(inst: Instance, perm) -> Instance:
    order = [0, *perm]
    return Instance(
        n_retailers=inst.n_retailers,
        horizon=inst.horizon,
        n_vehicles=inst.n_vehicles,
        unit_production_cost=inst.unit_production_cost,
        setup_cost=inst.setup_cost,
        inventory_cost=inst.inventory_cost[order],
        demand=inst.demand[order],
        transport_cost=inst.transport_cost[np.ix_(order, order)],
        production_capacity=inst.production_capacity,
        vehicle_capacity=inst.vehicle_capacity,
        inventory_capacity=inst.inventory_capacity[order],
        initial_inventory=inst.initial_inventory[order],
    )


@pytest.mark.parametrize("seed", range(5))
def test_relabel_invariance(seed):
    inst = generate_instance(40 + seed, 3, 3)
    base = solve_exact(inst).cost
    for perm in itertools.permutations(inst.retailers):
        assert solve_exact(relabel(inst, perm)).cost == pytest.approx(base, rel=1e-9)


def test_result_dict():
    res = solve_exact(generate_instance(1, 2, 2))
    doc = res.to_dict()
    assert doc["complete"] and doc["fingerprint"] == generate_instance(1, 2, 2).fingerprint()
