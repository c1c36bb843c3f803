import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heavyq import kw
from heavyq.dist import Deterministic, Exponential, Pareto
from heavyq.errors import UnstableError
from heavyq.regime import Regime

pos = st.floats(0.0, 50.0, allow_nan=False)


def _mm(s=2, a=1.0, b=0.8):
    return kw.QueueConfig(s, Exponential.with_mean(a), Pareto.with_mean(2.5, b))


def test_kw_step_by_hand():
    # [1, 4] + 3 on the first server -> [4, 4], minus 2 -> [2, 2]
    assert np.array_equal(kw.kw_step([1.0, 4.0], 3.0, 2.0), [2.0, 2.0])
    # reorders: [0, 1] + 5 -> [5, 1] - 0.5 -> [0.5, 4.5]
    assert np.array_equal(kw.kw_step([0.0, 1.0], 5.0, 0.5), [0.5, 4.5])
    # clamps at zero
    assert np.array_equal(kw.kw_step([0.0, 1.0, 2.0], 0.5, 3.0), [0.0, 0.0, 0.0])


def test_kw_step_rejects_bad_input():
    with pytest.raises(ValueError):
        kw.kw_step([2.0, 1.0], 1.0, 1.0)
    with pytest.raises(ValueError):
        kw.kw_step([0.0, 1.0], -1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(w=st.lists(pos, min_size=1, max_size=5), sigma=pos, tau=pos)
def test_kw_step_invariants(w, sigma, tau):
    w = np.sort(np.array(w))
    out = kw.kw_step(w, sigma, tau)
    assert np.all(out >= 0) and np.all(np.diff(out) >= 0)
    # total work is conserved up to what drains or clamps
    assert out.sum() <= w.sum() + sigma + 1e-9
    # the recursion is monotone in the starting state
    assert np.all(kw.kw_step(w + 1.0, sigma, tau) >= out)


def test_queue_config_properties():
    cfg = _mm(2, 1.0, 1.5)
    assert cfg.a == 1.0 and cfg.b == pytest.approx(1.5) and cfg.rho == pytest.approx(1.5)
    assert cfg.regime is Regime.MINIMAL
    assert _mm(2, 1.0, 0.5).regime is Regime.MAXIMAL
    assert kw.QueueConfig(2, Deterministic(1.0), Deterministic(1.0)).regime is Regime.INTERMEDIATE
    with pytest.raises(UnstableError):
        kw.QueueConfig(2, Exponential.with_mean(1.0), Deterministic(2.2))
    with pytest.raises(ValueError):
        kw.QueueConfig(0, Exponential(1.0), Exponential(2.0))


def test_path_matches_pure_python_steps():
    cfg = _mm(3, 1.0, 2.4)
    n = 3000
    path = kw.simulate_path(cfg, n, seed=11)
    _, sig, _, tau_next = next(kw._Draws(cfg, 11).chunks(n))
    w = np.zeros(3)
    for i in range(n):
        assert np.array_equal(path.workload_vectors[i], w)
        w = kw.kw_step(w, sig[i], tau_next[i])
    assert np.array_equal(path.waiting_times, path.workload_vectors[:, 0])


def test_single_server_is_lindley():
    cfg = kw.QueueConfig(1, Exponential.with_mean(2.0), Exponential(1.0))
    path = kw.simulate_path(cfg, 2000, seed=5, record=())
    _, sig, _, tau_next = next(kw._Draws(cfg, 5).chunks(2000))
    w = 0.0
    for i in range(2000):
        assert path.waiting_times[i] == w
        w = max(0.0, w + sig[i] - tau_next[i])


def test_path_independent_of_chunk_size():
    cfg = _mm()
    a = kw.simulate_path(cfg, 5000, seed=3)
    b = kw.simulate_path(cfg, 5000, seed=3, chunk=777)
    assert np.array_equal(a.workload_vectors, b.workload_vectors)
    assert np.array_equal(a.queue_lengths, b.queue_lengths)
    assert np.array_equal(a.queue_waiting, b.queue_waiting)


def test_seeds_and_replications_differ():
    cfg = _mm()
    a = kw.simulate_path(cfg, 1000, seed=3).waiting_times
    assert not np.array_equal(a, kw.simulate_path(cfg, 1000, seed=4).waiting_times)
    assert not np.array_equal(a, kw.simulate_path(cfg, 1000, seed=3, replication=1).waiting_times)


def _brute_force_queue(sig, tau_next, s):
    """Event-level FCFS simulation: earliest-free server, explicit start times."""
    n = len(sig)
    arrivals = np.concatenate([[0.0], np.cumsum(tau_next[:-1])])
    free = np.zeros(s)
    start = np.empty(n)
    depart = np.empty(n)
    for i in range(n):
        k = int(np.argmin(free))
        start[i] = max(arrivals[i], free[k])
        depart[i] = start[i] + sig[i]
        free[k] = depart[i]
    in_system = np.array([np.sum(depart[:i] > arrivals[i]) for i in range(n)])
    waiting = np.array([np.sum(start[:i + 1] > arrivals[i]) for i in range(n)])
    return start - arrivals, in_system, waiting


@pytest.mark.parametrize("s,b", [(1, 0.7), (2, 1.5), (3, 2.5)])
def test_queue_lengths_against_event_simulation(s, b):
    cfg = kw.QueueConfig(s, Exponential.with_mean(1.0), Exponential.with_mean(b))
    n = 3000
    path = kw.simulate_path(cfg, n, seed=21)
    _, sig, _, tau_next = next(kw._Draws(cfg, 21).chunks(n))
    wait, in_system, waiting = _brute_force_queue(sig, tau_next, s)
    assert np.allclose(path.waiting_times, wait, atol=1e-9)
    # ties at exactly-equal times are measure zero with continuous laws
    assert np.array_equal(path.queue_lengths, in_system)
    assert np.array_equal(path.queue_waiting, waiting)
    assert np.array_equal(path.queue_waiting, np.maximum(path.queue_lengths - s + 1, 0))


def test_queue_ring_buffer_growth():
    # a burst of near-simultaneous arrivals overflows the initial buffer
    from heavyq import _kernels
    n, s = 3000, 2
    g = np.random.default_rng(0)
    sig = g.exponential(1.0, n)
    tau_next = g.exponential(0.01, n)
    out_w = np.empty((n, s))
    out_sys = np.empty(n, dtype=np.int64)
    out_q = np.empty(n, dtype=np.int64)
    fifo, head, count = _kernels.kw_path_queue(np.zeros(s), sig, tau_next, out_w, out_sys,
                                               out_q, np.zeros(1), np.empty(16), 0, 0)
    _, in_system, waiting = _brute_force_queue(sig, tau_next, s)
    assert out_q.max() > 1000 and len(fifo) > 16
    assert np.array_equal(out_q, waiting)
    assert np.array_equal(out_sys, in_system)


def test_fixed_point_round_trip():
    x = np.array([0.0, 1.5, 1234.25])
    assert np.array_equal(kw.from_fixed(kw.to_fixed(x)), x)
    with pytest.raises(OverflowError):
        kw.to_fixed(1e12)


@pytest.mark.parametrize("b,a_up", [(0.8, 0.7), (1.5, 0.9)])
def test_couplings_hold(b, a_up):
    cfg = _mm(2, 1.0, b)
    up = kw.simulate_coupled(cfg, a_up, "upper", 50_000, seed=1)
    lo = kw.simulate_coupled(cfg, 1.3, "lower", 50_000, seed=1)
    assert up.violations == 0 and lo.violations == 0
    assert np.all(up.primal <= up.comparison + up.maxima[:, None])
    assert np.all(lo.primal >= lo.comparison - lo.maxima[:, None])
    assert np.all(up.maxima >= 0)


def test_coupling_shares_primal_path():
    cfg = _mm()
    trace = kw.simulate_coupled(cfg, 0.7, "upper", 2000, seed=8)
    path = kw.simulate_path(cfg, 2000, seed=8)
    assert np.allclose(trace.primal, path.workload_vectors, atol=4 * 2.0 ** -30 * 2000)


@pytest.mark.parametrize("direction,a_prime", [("upper", 0.3), ("upper", 1.0),
                                               ("lower", 0.9), ("sideways", 1.2)])
def test_coupling_preconditions(direction, a_prime):
    with pytest.raises(ValueError):
        kw.simulate_coupled(_mm(), a_prime, direction, 10, seed=0)


@pytest.mark.parametrize("b", [0.8, 1.5])
def test_majorants_hold(b):
    cfg = kw.QueueConfig(2, Deterministic(1.0), Pareto.with_mean(2.5, b))
    tr = kw.simulate_majorants(cfg, 50_000, seed=4)
    assert tr.violations == {"sorted": 0, "min": 0, "vector": 0}
    assert np.array_equal(np.sort(tr.labelled, axis=1), tr.workload)
    assert np.all(tr.workload[:, 0] <= tr.single.min(axis=1))
    assert set(np.unique(tr.alpha)) == {1, 2}


def test_majorants_need_d_gi_2():
    with pytest.raises(ValueError):
        kw.simulate_majorants(_mm(), 10, seed=0)
    with pytest.raises(ValueError):
        kw.simulate_majorants(kw.QueueConfig(3, Deterministic(1.0), Exponential(1.0)), 10, 0)


@pytest.mark.parametrize("b,block", [(0.8, 10), (1.5, 50), (1.9, 200)])
def test_block_recursion(b, block):
    cfg = kw.QueueConfig(2, Deterministic(1.0), Pareto.with_mean(2.2, b))
    assert kw.check_block_recursion(cfg, block, 500, seed=6) == 0


def test_monotonicity_zero_and_guard():
    g = np.random.default_rng(1)
    sig, tau = g.exponential(1.5, 800), g.exponential(1.0, 800)
    assert kw.monotonicity_violations(sig, tau, sig + 0.3, tau * 0.9, 2) == 0
    with pytest.raises(ValueError):
        kw.monotonicity_violations(sig, tau, sig - 0.1, tau, 2)


def test_oscillating_walk_rule():
    def sampler(g, m):
        return np.full(m, 1.0), np.full(m, -1.0)

    path = kw.oscillating_walk(sampler, [0.0, 0.0], 4, seed=0)
    # V1 <= V2 adds (xi, eta) = (1, -1); otherwise (eta, xi)
    assert np.array_equal(path, [[0, 0], [1, -1], [0, 0], [1, -1]])
    with pytest.raises(ValueError):
        kw.oscillating_walk(sampler, [0.0], 3, seed=0)
