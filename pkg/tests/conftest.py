import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from prppp.model import Instance  # noqa: E402


def make_instance(c, d, **kw):
    """Small explicit-matrix instance; ``d`` lists retailer rows only."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0] - 1
    d = np.asarray(d, dtype=float).reshape(n, -1)
    T = d.shape[1]
    defaults = dict(
        n_retailers=n,
        horizon=T,
        n_vehicles=1,
        unit_production_cost=1.0,
        setup_cost=0.0,
        inventory_cost=np.ones(n + 1),
        demand=np.vstack([np.zeros((1, T)), d]),
        transport_cost=c,
        production_capacity=1000.0,
        vehicle_capacity=1000.0,
        inventory_capacity=np.full(n + 1, 1000.0),
        initial_inventory=np.zeros(n + 1),
    )
    defaults.update(kw)
    return Instance(**defaults)


@pytest.fixture
def line3():
    """Supplier and three retailers on a unit-spaced line."""
    pts = np.arange(4.0)
    c = np.abs(pts[:, None] - pts[None, :])
    return make_instance(c, [[5, 0], [0, 5], [5, 5]])


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
