import numpy as np
import pytest

from prppp import kernels


def random_cost(rng, n):
    pts = rng.uniform(0, 100, size=(n, 2))
    return np.round(np.linalg.norm(pts[:, None] - pts[None], axis=-1), 2)


@pytest.mark.parametrize("seed", range(10))
def test_held_karp_variants_agree(seed):
    cost = random_cost(np.random.default_rng(seed), 3 + seed % 7)
    loops = kernels._held_karp_loops(cost)
    numpy_ = kernels._held_karp_numpy(cost)
    jit = kernels._held_karp_jit(cost)
    assert np.array_equal(loops, numpy_)
    assert np.array_equal(loops, jit)


@pytest.mark.parametrize("seed", range(10))
def test_two_opt_variants_agree(seed):
    rng = np.random.default_rng(100 + seed)
    n = 5 + seed * 3
    cost = random_cost(rng, n)
    tour = np.concatenate([[0], rng.permutation(np.arange(1, n)), [0]]).astype(np.int64)
    a = kernels._two_opt_loops(tour.copy(), cost)
    b = kernels._two_opt_numpy(tour.copy(), cost)
    c = kernels._two_opt_jit(tour.copy(), cost)
    assert np.array_equal(a, b) and np.array_equal(a, c)


def test_two_opt_removes_crossing():
    # Square visited as a bow tie.
    pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    cost = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    out = kernels.two_opt(np.array([0, 3, 1, 2, 0]), cost)
    length = sum(cost[a, b] for a, b in zip(out[:-1], out[1:]))
    assert length == pytest.approx(4.0)


def test_fallback_flag(monkeypatch):
    import importlib

    from prppp import _accel

    monkeypatch.setenv("PRPPP_NO_NUMBA", "1")
    reloaded = importlib.reload(_accel)
    try:
        assert reloaded.HAVE_NUMBA is False
    finally:
        monkeypatch.delenv("PRPPP_NO_NUMBA")
        importlib.reload(_accel)


def test_worker_count(monkeypatch):
    from prppp._accel import worker_count

    monkeypatch.setenv("PRPPP_THREADS", "1")
    assert worker_count() == 1
