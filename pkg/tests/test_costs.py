import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_instance
from prppp.costs import (
    InfeasiblePlanError,
    evaluate_global_cost,
    lot_for_lot_production,
    simulate_inventory,
    supplier_visible_cost,
)
from prppp.model import Plan

C2 = [[0, 3, 4], [3, 0, 5], [4, 5, 0]]


def test_inventory_early_delivery(line3):
    plan = Plan({(3, 1, 1): 10.0}, {(1, 1): (0, 3, 0)}, (10.0, 0.0), (True, False))
    inst = make_instance(np.abs(np.arange(4.0)[:, None] - np.arange(4.0)), [[1, 0], [0, 1], [0, 10]])
    inv = simulate_inventory(inst, plan)
    assert inv[3, 0] == 10 and inv[3, 1] == 0


def test_inventory_null_dynamics():
    inst = make_instance(C2, [[1, 0], [0, 1]], initial_inventory=np.array([4.0, 2.0, 3.0]))
    inv = simulate_inventory(inst, Plan.empty(2))
    assert inv[0].tolist() == [4, 4]
    assert inv[1].tolist() == [1, 1] and inv[2].tolist() == [3, 2]


def test_inventory_negative_is_reported():
    inst = make_instance([[0, 1], [1, 0]], [[5]])
    assert simulate_inventory(inst, Plan.empty(1))[1, 0] == -5


def test_two_setup_production_example():
    # Free transport and no holding, so only 8 * 340 + 1500 * 2 remains.
    inst = make_instance([[0, 0], [0, 0]], [[140, 0, 200, 0]], unit_production_cost=8.0, setup_cost=1500.0,
                         inventory_cost=np.zeros(2))
    plan = Plan({(1, 1, 1): 140.0, (1, 1, 3): 200.0}, {(1, 1): (0, 1, 0), (1, 3): (0, 1, 0)},
                (140.0, 0.0, 200.0, 0.0), (True, False, True, False))
    assert evaluate_global_cost(inst, plan) == 5720.0


def test_empty_plan_zero_cost():
    inst = make_instance([[0, 1], [1, 0]], [[1, 0]], initial_inventory=np.array([0.0, 1.0]))
    assert evaluate_global_cost(inst, Plan.empty(2)) == 0


def test_out_and_back_transport():
    inst = make_instance([[0, 7], [7, 0]], [[4]], unit_production_cost=0.0)
    plan = Plan({(1, 1, 1): 4.0}, {(1, 1): (0, 1, 0)}, (4.0,), (True,))
    assert evaluate_global_cost(inst, plan) == 14.0


def test_negative_inventory_rejected():
    inst = make_instance([[0, 1], [1, 0]], [[5]])
    with pytest.raises(InfeasiblePlanError):
        evaluate_global_cost(inst, Plan.empty(1))
    with pytest.raises(InfeasiblePlanError):
        supplier_visible_cost(inst, Plan.empty(1))


def test_visible_equals_global_without_retailer_stock():
    inst = make_instance(C2, [[2, 3], [1, 1]], inventory_cost=np.array([0.5, 2.0, 3.0]))
    plan = Plan({(1, 1, 1): 2, (2, 1, 1): 1, (1, 1, 2): 3, (2, 1, 2): 1},
                {(1, 1): (0, 1, 2, 0), (1, 2): (0, 1, 2, 0)}, (3, 4), (True, True))
    assert supplier_visible_cost(inst, plan) == evaluate_global_cost(inst, plan)


def test_visible_gap_is_private_holding():
    inst = make_instance([[0, 1, 1, 1], [1, 0, 1, 1], [1, 1, 0, 1], [1, 1, 1, 0]], [[1, 0], [1, 0], [0, 10]],
                         inventory_cost=np.array([0.0, 1.0, 1.0, 2.0]))
    plan = Plan({(1, 1, 1): 1, (2, 1, 1): 1, (3, 1, 1): 10}, {(1, 1): (0, 1, 2, 3, 0)}, (12, 0), (True, False))
    assert evaluate_global_cost(inst, plan) - supplier_visible_cost(inst, plan) == 20.0


def test_zero_plan_visible_cost():
    inst = make_instance([[0, 1], [1, 0]], [[0, 2]], initial_inventory=np.array([0.0, 2.0]))
    assert supplier_visible_cost(inst, Plan.empty(2)) == 0


def _ship(T, totals):
    return {(1, 1, t): q for t, q in enumerate(totals, start=1) if q}


def test_lot_for_lot_single_period():
    inst = make_instance([[0, 1], [1, 0]], [[30, 0, 0]], production_capacity=100.0)
    assert lot_for_lot_production(inst, _ship(3, [30, 0, 0])) == ((30.0, 0.0, 0.0), (True, False, False))


def test_lot_for_lot_capacity_marker():
    inst = make_instance([[0, 1], [1, 0]], [[60, 60]], production_capacity=50.0)
    assert lot_for_lot_production(inst, _ship(2, [60, 60])) is None


def test_lot_for_lot_uses_supplier_stock():
    # Hand simulation: stock 15 covers period 1 (10) and 5 of period 2.
    inst = make_instance([[0, 1], [1, 0]], [[10, 10]], initial_inventory=np.array([15.0, 0.0]))
    p, y = lot_for_lot_production(inst, _ship(2, [10, 10]))
    assert p == (0.0, 5.0) and y == (False, True)
    plan = Plan(_ship(2, [10, 10]), {}, p, y)
    assert simulate_inventory(inst, plan)[0, 0] == 5


def test_lot_for_lot_pulls_forward_over_capacity():
    inst = make_instance([[0, 1], [1, 0]], [[10, 70]], production_capacity=50.0)
    p, y = lot_for_lot_production(inst, _ship(2, [10, 70]))
    assert p == (30.0, 50.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=6), st.integers(1, 60), st.integers(0, 30))
def test_lot_for_lot_matches_prefix_condition(ship, cap, stock):
    T = len(ship)
    inst = make_instance([[0, 1], [1, 0]], [[1] + [0] * (T - 1)], production_capacity=float(cap),
                         initial_inventory=np.array([float(stock), 0.0]))
    out = lot_for_lot_production(inst, np.array(ship, dtype=float))
    # Production may run early, so the plan exists iff every prefix of net
    # demand fits in the capacity of that prefix.
    net, s = [], stock
    for q in ship:
        used = min(s, q)
        s -= used
        net.append(q - used)
    feasible = all(sum(net[: t + 1]) <= cap * (t + 1) for t in range(T))
    assert (out is not None) == feasible
    if out is not None:
        p, y = out
        level = stock + np.cumsum(np.array(p) - np.array(ship))
        assert np.all(level >= -1e-9) and max(p) <= cap
        assert all(flag == (q > 0) for q, flag in zip(p, y))
