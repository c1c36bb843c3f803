import csv
import io
import json
import math

import numpy as np
import pytest

from heavyq import kw, mc
from heavyq.dist import Deterministic, Exponential, Pareto
from heavyq.errors import InsufficientSamples, UnstableError

MM1 = kw.QueueConfig(1, Exponential.with_mean(2.0), Exponential(1.0))
MAXIMAL = kw.QueueConfig(2, Exponential.with_mean(1.0), Pareto.with_mean(2.5, 0.8))


def test_zero_service_never_waits():
    cfg = kw.QueueConfig(2, Exponential(1.0), Deterministic(0.0))
    with pytest.warns(InsufficientSamples):
        est = mc.estimate_tail(cfg, 0.1, 20_000, seed=0)
    assert est.p_hat == 0.0 and est.ci_low == 0.0 == est.ci_high and est.insufficient
    with pytest.warns(InsufficientSamples):
        q = mc.estimate_queue_tail(cfg, 0, 20_000, seed=0)
    assert q.p_hat == 0.0


def test_estimate_fields_and_invariants():
    est = mc.estimate_tail(MM1, 1.0, 200_000, n_batches=40, seed=1)
    assert 0 <= est.ci_low <= est.p_hat <= est.ci_high <= 1
    assert est.n_effective == 200_000 - mc.default_burn_in(200_000)
    assert est.n_batches == 40 and est.query == (1.0,) and est.seed == 1
    assert len(est.drift) == 2 and not est.insufficient


def test_default_burn_in():
    assert mc.default_burn_in(10**7) == 10**6
    assert mc.default_burn_in(50_000) == 10_000
    assert mc.default_burn_in(1000) == 500


@pytest.mark.parametrize("kwargs", [dict(burn_in=1000), dict(n_batches=5),
                                    dict(n_batches=2000)])
def test_argument_validation(kwargs):
    with pytest.raises(ValueError):
        mc.estimate_tail(MM1, 1.0, 1000, **kwargs)


def test_unstable_config_rejected():
    with pytest.raises(UnstableError):
        mc.compare(kw.QueueConfig(1, Exponential(1.0), Exponential(0.5)), xs=[1.0])


def test_batch_sizes_partition():
    sizes = mc._batch_sizes(1003, 10)
    assert sizes.sum() == 1003 and sizes.max() - sizes.min() <= 1


def test_mm1_oracle_single_seed():
    xs = [0.5, 2.0, 4.6]
    res = mc.estimate_tails(MM1, xs=xs, n_customers=2_000_000, seed=17)
    for x in xs:
        assert res.marginal[x].p_hat == pytest.approx(0.5 * math.exp(-0.5 * x), rel=0.05)


def test_mm1_queue_oracle():
    # one server: waiting and system counts coincide, P{Q > n} = rho^(n+1)
    res = mc.estimate_tails(MM1, levels=[0, 1, 3], n_customers=2_000_000, seed=2)
    for n in (0, 1, 3):
        assert res.queue[n].p_hat == pytest.approx(0.5 ** (n + 1), rel=0.05)
        assert res.system[n].p_hat == res.queue[n].p_hat


def test_thread_count_does_not_change_results():
    kwargs = dict(xs=[1.0, 3.0], joint=[(1.0, 2.0)], levels=[1], n_customers=200_000,
                  seed=5, replications=3)
    one = mc.estimate_tails(MAXIMAL, threads=1, **kwargs)
    many = mc.estimate_tails(MAXIMAL, threads=3, **kwargs)
    assert one.marginal == many.marginal and one.joint == many.joint
    assert one.queue == many.queue and one.system == many.system


def test_same_seed_is_bit_identical():
    a = mc.estimate_tail(MAXIMAL, 2.0, 100_000, seed=9)
    b = mc.estimate_tail(MAXIMAL, 2.0, 100_000, seed=9)
    assert a == b


def test_event_inclusion_and_monotonicity_on_one_path():
    xs = [0.0, 0.5, 1.0, 2.0, 4.0]
    res = mc.estimate_tails(MAXIMAL, xs=xs, joint=[(x, x) for x in xs] + [(0.5, 2.0)],
                            n_customers=300_000, seed=4)
    counts = [res.marginal[x].exceedances for x in xs]
    assert all(u >= v for u, v in zip(counts, counts[1:]))
    for x in xs:
        assert res.joint[(x, x)].exceedances <= res.marginal[x].exceedances
    assert res.joint[(0.5, 2.0)].exceedances <= res.marginal[0.5].exceedances


def test_joint_pair_is_canonicalised():
    a = mc.estimate_joint_tail(MAXIMAL, 2.0, 1.0, 100_000, seed=3)
    b = mc.estimate_joint_tail(MAXIMAL, 1.0, 2.0, 100_000, seed=3)
    assert a == b and a.query == (1.0, 2.0)


def test_joint_matches_direct_count_on_path():
    path = kw.simulate_path(MAXIMAL, 100_000, seed=6)
    burn = mc.default_burn_in(100_000)
    est = mc.estimate_joint_tail(MAXIMAL, 0.0, 1.5, 100_000, seed=6)
    w = path.workload_vectors[burn:]
    direct = np.mean((w[:, 0] > 0.0) & (w[:, 1] > 1.5))
    assert est.p_hat == pytest.approx(direct, abs=1e-15)


def test_little_law_level_zero_and_deterministic_input():
    d_cfg = kw.QueueConfig(2, Deterministic(1.0), Pareto.with_mean(2.5, 1.5))
    res = mc.estimate_tails(d_cfg, xs=[0.0, 3.0], n_customers=200_000, seed=8,
                            keep_waiting=True)
    w = res.waiting_sample
    zero = mc.little_law_estimate(d_cfg, 0, w, seed=8)
    assert zero.p_hat == res.marginal[0.0].p_hat
    three = mc.little_law_estimate(d_cfg, 3, w, seed=8)
    assert three.p_hat == res.marginal[3.0].p_hat


def test_little_law_agrees_with_direct_count():
    cfg = kw.QueueConfig(2, Exponential.with_mean(1.0), Deterministic(1.2))
    res = mc.estimate_tails(cfg, levels=[1, 3], n_customers=1_000_000, seed=3,
                            keep_waiting=True)
    for n in (1, 3):
        little = mc.little_law_estimate(cfg, n, res.waiting_sample, seed=3)
        assert mc.estimates_agree(res.queue[n], little)


def test_ci_width_shrinks_with_budget():
    ratios = []
    for seed in range(20):
        small = mc.estimate_tail(MM1, 2.0, 500_000, seed=seed)
        large = mc.estimate_tail(MM1, 2.0, 1_000_000, seed=seed)
        ratios.append(large.half_width / small.half_width)
    assert 0.6 <= float(np.mean(ratios)) <= 0.85


def test_bracket_pass_logic():
    est = mc.TailEstimate(1e-3, 8e-4, 1.2e-3, 1000, 50, 0, 0, (1.0,))
    from heavyq.asymp import Kind, Prediction
    from heavyq.regime import Regime

    def pred(kind, v):
        return Prediction("x", v, kind, Regime.MAXIMAL, ())

    assert mc.bracket_pass(est, [pred(Kind.LOWER, 5e-4), pred(Kind.UPPER, 2e-3)])
    assert mc.bracket_pass(est, [pred(Kind.EXACT, 1.7e-3)], slack=1.5)
    assert not mc.bracket_pass(est, [pred(Kind.EXACT, 2e-3)], slack=1.5)
    assert not mc.bracket_pass(est, [pred(Kind.LOWER, 2e-3)], slack=1.5)
    assert mc.bracket_pass(est, []) is None
    with pytest.raises(ValueError):
        mc.bracket_pass(est, [], slack=0.5)


def test_compare_maximal_ratio_trends_to_one():
    cfg = kw.QueueConfig(2, Deterministic(1.0), Pareto.with_mean(2.5, 0.8))
    rows = mc.compare(cfg, xs=[3.0, 10.0], n_customers=20_000_000, seed=1)
    r3, r10 = (row.ratios["max_stab_exact"] for row in rows)
    assert abs(r10 - 1) < abs(r3 - 1)
    assert all(not row.no_exact_formula for row in rows)


def test_compare_intermediate_has_bounds_only():
    cfg = kw.QueueConfig(2, Exponential.with_mean(1.0), Pareto.with_mean(2.5, 1.0))
    rows = mc.compare(cfg, xs=[2.0], n_customers=100_000, seed=1)
    row = rows[0]
    assert row.no_exact_formula
    assert {p.formula_id for p in row.predictions} == {"min_stab_upper", "min_stab_alt_lower",
                                                       "s_server_upper"}
    assert all(p.kind.value != "exact-asymptotic" for p in row.predictions)


def test_compare_exports():
    rows = mc.compare(MAXIMAL, xs=[2.0], joint=[(1.0, 2.0)], levels=[1],
                      n_customers=200_000, seed=2)
    text = mc.rows_to_csv(rows)
    table = list(csv.reader(io.StringIO(text)))
    assert tuple(table[0]) == mc.CSV_COLUMNS
    ids = [r[6] for r in table[1:]]
    assert "max_stab_exact" in ids and "joint_max_exact" in ids and "little_law" in ids
    data = json.loads(mc.rows_to_json(rows))
    assert len(data) == 3 and data[2]["reference"]["statistic"] == "little"
    for row in rows:
        assert all(math.isfinite(v) for v in row.ratios.values())


def test_estimates_csv_has_drift_columns():
    res = mc.estimate_tails(MAXIMAL, xs=[1.0], levels=[2], n_customers=100_000, seed=1)
    table = list(csv.reader(io.StringIO(mc.estimates_to_csv(res))))
    assert tuple(table[0]) == mc.ESTIMATE_COLUMNS
    assert {r[3] for r in table[1:]} == {"waiting", "queue", "system"}
