"""Acceptance suite: one test per criterion, each printing a status line.

Run with ``pytest tests/test_acceptance.py -v`` (the status lines appear in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from acceptance_log import record  # noqa: E402
from heavyq import asymp, kw, mc, quad  # noqa: E402
from heavyq.dist import Deterministic, Exponential, Pareto, WeibullTail  # noqa: E402

BIG = 10**8


def test_criterion_01_quadrature_identity():
    worst = 0.0
    laws = {"exp": Exponential(1.0), "pareto": Pareto(2.5, 1.0)}
    for law in laws.values():
        for x in (0.0, 1.0, 10.0):
            for a, b in ((2.0, 1.0), (1.0, 0.3)):
                f = (lambda x_: lambda y: law.tail(x_ + y))(x)
                scale = max(1.0, x)
                res = quad.verify_integral_identity(f, a, a - b, 1e-7, scale=scale)
                worst = max(worst, res)
    ok = worst <= 1e-5
    record(1, "integral identity", ok, f"max residual {worst:.2e} (tol 1e-5) over 12 cases")
    assert ok


def test_criterion_02_reduction_identities():
    xs = np.geomspace(0.5, 200.0, 20)
    pm = Pareto.with_mean(3.0, 1.5)          # a=2: maximal
    pn = Pareto.with_mean(2.2, 1.5)          # a=1: minimal
    worst = 0.0
    for x in xs:
        pairs = [
            (asymp.joint_exact_max(x, x, 2.0, pm), asymp.max_stab_exact(x, 2.0, pm)),
            (asymp.joint_min(x, x, 1.0, pn, c_ratio=1.0), asymp.min_stab_exact(x, 1.0, pn)),
            (asymp.s_server_upper(x, 1.0, 2, pn), asymp.min_stab_upper(x, 1.0, pn)),
            (asymp.s_server_lower_minimal(x, 1.0, 2, pn, 0.2),
             asymp.min_stab_lower(x, 1.0, pn, 0.2)),
        ]
        for p, q in pairs:
            worst = max(worst, abs(p.raw_value - q.raw_value) / q.raw_value)
    ok = worst <= 1e-10
    record(2, "reduction identities", ok, f"max relative error {worst:.1e} over 20 points")
    assert ok


def test_criterion_03_mm1_oracle():
    cfg = kw.QueueConfig(1, Exponential.with_mean(2.0), Exponential(1.0))
    rho, gap = 0.5, 0.5
    xs = [0.5, 1.0, 2.0, 3.0, 4.6]
    seeds_ok = 0
    cover = []
    for seed in range(20):
        res = mc.estimate_tails(cfg, xs=xs, n_customers=10**7, seed=seed)
        hits = sum(res.marginal[x].covers(rho * math.exp(-gap * x)) for x in xs)
        cover.append(hits)
        seeds_ok += hits >= 4
    ok = seeds_ok >= 18
    record(3, "M/M/1 oracle coverage", ok,
           f"{seeds_ok}/20 seeds cover >= 4/5 points; point coverage {sum(cover)}/100; "
           f"per-seed hits {cover}")
    assert ok


def test_criterion_04_single_server_heavy_tail():
    service = Pareto(2.5, 1.0)
    a = service.mean / 0.5
    cfg = kw.QueueConfig(1, Exponential.with_mean(a), service)
    x = 54.0
    pred = asymp.single_server_tail(x, a, service).value
    est = mc.estimate_tail(cfg, x, BIG, seed=4)
    ratio = est.p_hat / pred
    ok = 0.7 <= ratio <= 1.4 and 5e-4 < pred < 2e-3
    record(4, "single-server heavy tail", ok,
           f"x={x}, prediction {pred:.3e}, p_hat {est.p_hat:.3e}, ratio {ratio:.3f} "
           "(need [0.7, 1.4])")
    assert ok


def test_criterion_05_maximal_bracket():
    # deterministic input: the Poisson-input estimate is still far from its
    # limit at these x values (see README)
    a = 1.0
    service = Pareto.with_mean(2.5, 0.8)
    cfg = kw.QueueConfig(2, Deterministic(a), service)
    xs = [5.0, 10.0]
    lo, hi = asymp.max_stab_constants(a, service.mean)
    res = mc.estimate_tails(cfg, xs=xs, n_customers=BIG, seed=5)
    ratios, details, ok = [], [], True
    for x in xs:
        exact = asymp.max_stab_exact(x, a, service).value
        p = res.marginal[x].p_hat
        scaled = p / float(service.integrated_tail(x)) ** 2
        r = p / exact
        ratios.append(r)
        ok &= 1e-5 <= exact <= 1e-3
        ok &= lo * 0.5 <= scaled <= hi * 2.0
        ok &= 0.5 <= r <= 2.0
        details.append(f"x={x}: p/B_I^2={scaled:.3f} in [{lo * 0.5:.3f}, {hi * 2:.3f}], "
                       f"ratio {r:.3f}")
    closer = abs(ratios[1] - 1) < abs(ratios[0] - 1)
    ok &= closer
    record(5, "maximal-stability bracket", ok, "; ".join(details) + f"; closer at larger x: {closer}")
    assert ok


def test_criterion_06_minimal_exact():
    a = 1.0
    service = Pareto.with_mean(2.2, 1.5)
    cfg = kw.QueueConfig(2, Exponential.with_mean(a), service)
    x = 113.0
    exact = asymp.min_stab_exact(x, a, service).value
    lower = asymp.min_stab_lower(x, a, service, delta=0.2).value
    upper = asymp.min_stab_upper(x, a, service).value
    est = mc.estimate_tail(cfg, x, BIG, seed=6)
    r = est.p_hat / exact
    ok = (0.5 <= r <= 2.0 and lower * 0.5 <= est.p_hat <= upper * 2.0
          and 5e-4 < exact < 2e-3)
    record(6, "minimal-stability asymptotic", ok,
           f"x={x}, exact {exact:.3e}, p_hat {est.p_hat:.3e}, ratio {r:.3f}; "
           f"window [{lower * 0.5:.3e}, {upper * 2:.3e}]")
    assert ok


def test_criterion_07_pathwise_couplings():
    n = 10**6
    counts = {"upper": 0, "lower": 0, "majorant": 0}
    for b, a_up in ((0.8, 0.7), (1.5, 0.9)):
        poisson = kw.QueueConfig(2, Exponential.with_mean(1.0), Pareto.with_mean(2.5, b))
        det = kw.QueueConfig(2, Deterministic(1.0), Pareto.with_mean(2.5, b))
        for seed in range(5):
            counts["upper"] += kw.simulate_coupled(poisson, a_up, "upper", n, seed,
                                                   check=False).violations
            counts["lower"] += kw.simulate_coupled(poisson, 1.3, "lower", n, seed,
                                                   check=False).violations
            v = kw.simulate_majorants(det, n, seed, check=False).violations
            counts["majorant"] += sum(v.values())
    ok = not any(counts.values())
    record(7, "pathwise couplings", ok, f"violations {counts} over 5 seeds x 2 regimes x 1e6 steps")
    assert ok


def test_criterion_08_oscillating_walk():
    def sampler(g, m):
        return g.exponential(1.0, m) - 2.0, g.exponential(1.0, m) - 4.0

    n = 10**6
    errs = []
    for seed in range(5):
        v = kw.oscillating_walk(sampler, [0.0, 0.0], n + 1, seed)[-1]
        errs.append(float(np.max(np.abs(v / n - (-2.0)))))
    ok = max(errs) <= 0.05
    record(8, "oscillating walk drift", ok, f"max |V_n/n + 2| = {max(errs):.4f} (tol 0.05)")
    assert ok


def test_criterion_09_little_law():
    cfg = kw.QueueConfig(2, Exponential.with_mean(1.0), Deterministic(1.2))
    res = mc.estimate_tails(cfg, levels=[1, 3, 5], n_customers=10**7, seed=9,
                            keep_waiting=True)
    details, ok = [], True
    for level in (1, 3, 5):
        direct = res.queue[level]
        little = mc.little_law_estimate(cfg, level, res.waiting_sample, seed=9)
        agree = mc.estimates_agree(direct, little)
        ok &= agree
        details.append(f"n={level}: {direct.p_hat:.4g} vs {little.p_hat:.4g} "
                       f"({'agree' if agree else 'DISAGREE'})")
    record(9, "distributional Little's law", ok, "; ".join(details))
    assert ok


def test_criterion_10_monotonicity():
    g = np.random.default_rng(10)
    bad = 0
    for _ in range(200):
        s = int(g.integers(1, 4))
        n = int(g.integers(50, 2000))
        sig = g.pareto(2.5, n) * g.uniform(0.2, 2.0)
        tau = g.exponential(g.uniform(0.3, 1.5), n)
        sig2, tau2 = sig.copy(), tau.copy()
        mask = g.random(n) < g.uniform(0.01, 0.5)
        sig2[mask] += g.exponential(1.0, mask.sum())
        mask = g.random(n) < g.uniform(0.01, 0.5)
        tau2[mask] *= g.uniform(0.0, 1.0, mask.sum())
        bad += kw.monotonicity_violations(sig, tau, sig2, tau2, s)
    ok = bad == 0
    record(10, "monotonicity", ok, f"{bad} violations in 200 randomized trials")
    assert ok


def test_criterion_11_weibull_crossover():
    beta, a, b = 0.8, 1.0, 1.5
    assert (b / (b - a)) ** beta > 2
    service = WeibullTail.from_integrated_weibull(beta, b)
    details, ok, checked = [], True, 0
    for x in (10.0, 15.0, 20.0):
        alt = asymp.min_stab_alt_lower(x, a, service).value
        exact = asymp.min_stab_exact(x, a, service).value
        if min(alt, exact) < 1e-12:
            continue
        checked += 1
        ok &= alt > exact
        details.append(f"x={x}: alt {alt:.3e} > exact {exact:.3e}")
    ok &= checked > 0
    record(11, "Weibull crossover", ok, "; ".join(details))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
