"""Monte Carlo estimation of stationary tail probabilities.

Paths start empty and are simulated with the compiled workload recursion;
after a burn-in the remaining customers are split into contiguous batches
and confidence intervals come from batch means with a normal quantile.
Several replications can run on a thread pool; their batches are pooled in
replication order, so results never depend on the thread count.

Queue lengths are Palm quantities (seen by arriving customers).  ``"queue"``
counts customers waiting for service, the arrival included if it waits; this
is the count for which ``P{Q > n} = P{W > T_n}`` holds with ``T_n`` a sum of
``n`` independent interarrival times.  ``"system"`` counts everybody present.
"""

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, asymp, rng as rngmod
from .dist import Deterministic
from .errors import InsufficientSamples
from .kw import CHUNK, _Draws

Z95 = 1.959963984540054
MIN_EXCEEDANCES = 10
DEFAULT_SLACK = 1.5
CSV_COLUMNS = ("query_x", "query_y", "level", "p_hat", "ci_low", "ci_high",
               "formula_id", "prediction", "ratio", "bracket_pass")
ESTIMATE_COLUMNS = ("query_x", "query_y", "level", "count", "p_hat", "ci_low", "ci_high",
                    "n_effective", "n_batches", "burn_in", "seed", "exceedances",
                    "drift_first", "drift_second", "insufficient")


@dataclass(frozen=True)
class TailEstimate:
    """Point estimate and 95% batch-means interval for one tail query.

    ``query`` is ``(x,)``, ``(x, y)`` or ``(n,)`` for a queue level;
    ``drift`` holds the estimates from the first and second half of the
    batches.
    """

    p_hat: float
    ci_low: float
    ci_high: float
    n_effective: int
    n_batches: int
    burn_in: int
    seed: int
    query: tuple
    statistic: str = "waiting"
    exceedances: int = 0
    drift: tuple = (math.nan, math.nan)
    insufficient: bool = False

    @property
    def half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)

    def covers(self, p):
        return self.ci_low <= p <= self.ci_high

    def to_dict(self):
        return {"p_hat": self.p_hat, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "n_effective": self.n_effective, "n_batches": self.n_batches,
                "burn_in": self.burn_in, "seed": self.seed, "query": list(self.query),
                "statistic": self.statistic, "exceedances": self.exceedances,
                "drift": list(self.drift), "insufficient": self.insufficient}


@dataclass
class ComparisonRow:
    query: tuple
    estimate: TailEstimate
    predictions: list
    ratios: dict
    bracket_pass: bool = None
    no_exact_formula: bool = False
    reference: TailEstimate = None

    def to_dict(self):
        return {"query": list(self.query), "estimate": self.estimate.to_dict(),
                "predictions": [p.to_dict() for p in self.predictions],
                "ratios": dict(self.ratios), "bracket_pass": self.bracket_pass,
                "no_exact_formula": self.no_exact_formula,
                "reference": None if self.reference is None else self.reference.to_dict()}


@dataclass
class SimulationResult:
    """Pooled estimates from :func:`estimate_tails`."""

    marginal: dict = field(default_factory=dict)
    joint: dict = field(default_factory=dict)
    queue: dict = field(default_factory=dict)
    system: dict = field(default_factory=dict)
    waiting_sample: np.ndarray = None


def default_burn_in(n_customers):
    return max(n_customers // 10, min(10_000, n_customers // 2))


def batch_means(counts, sizes, *, seed=0, query=(), burn_in=0, statistic="waiting"):
    """TailEstimate from per-batch exceedance counts and batch sizes."""
    counts = np.asarray(counts, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    k = len(counts)
    n = int(sizes.sum())
    total = counts.sum()
    p_hat = total / n
    se = np.std(counts / sizes, ddof=1) / math.sqrt(k) if k > 1 else math.inf
    half = k // 2
    drift = (counts[:half].sum() / sizes[:half].sum(), counts[half:].sum() / sizes[half:].sum())
    insufficient = total < MIN_EXCEEDANCES
    if insufficient:
        warnings.warn(f"only {int(total)} exceedances for query {query}",
                      InsufficientSamples, stacklevel=3)
    return TailEstimate(
        p_hat=float(p_hat), ci_low=float(max(0.0, p_hat - Z95 * se)),
        ci_high=float(min(1.0, p_hat + Z95 * se)), n_effective=n, n_batches=k,
        burn_in=int(burn_in), seed=seed, query=tuple(query), statistic=statistic,
        exceedances=int(total), drift=tuple(float(d) for d in drift),
        insufficient=bool(insufficient))


def _batch_sizes(n_eff, n_batches):
    edges = -(-np.arange(n_batches + 1, dtype=np.int64) * n_eff // n_batches)
    return np.diff(edges)


def _run_replication(cfg, xs, jx, jy, levels, n, burn_in, n_batches, seed, rep, keep):
    n_eff = n - burn_in
    w = np.zeros(cfg.s)
    clock = np.zeros(1)
    fifo = np.empty(1024)
    head = count = 0
    marg = np.zeros((n_batches, len(xs)), dtype=np.int64)
    joint = np.zeros((n_batches, len(jx)), dtype=np.int64)
    queue = np.zeros((n_batches, len(levels)), dtype=np.int64)
    sysq = np.zeros((n_batches, len(levels)), dtype=np.int64)
    wsample = np.empty(n_eff if keep else 0)
    stored = 0
    for start, sig, _, tau_next in _Draws(cfg, seed, rep).chunks(n):
        out = wsample[stored:] if keep else wsample
        fifo, head, count, got = _kernels.tail_counts(
            w, sig, tau_next, start, burn_in, n_eff, n_batches, xs, jx, jy, levels,
            clock, fifo, head, count, marg, joint, queue, sysq, out)
        stored += got
    return marg, joint, queue, sysq, (wsample if keep else None)


def estimate_tails(cfg, xs=(), joint=(), levels=(), n_customers=10**6, burn_in=None,
                   n_batches=50, seed=0, replications=1, threads=1, keep_waiting=False):
    """Estimate several tail probabilities from one set of simulated paths.

    Parameters
    ----------
    cfg : QueueConfig
    xs : sequence of float
        Thresholds for ``P{W > x}``.
    joint : sequence of (x, y)
        Thresholds for ``P{W1 > x, W2 > y}`` (two or more servers); each
        pair is put in ascending order.
    levels : sequence of int
        Queue levels for ``P{Q > n}``, estimated both as waiting count and
        as number in system.
    n_customers, burn_in, n_batches : int
        Per replication.  ``burn_in`` defaults to :func:`default_burn_in`.
    replications, threads : int
        Independent replications and the worker count used to run them.
    keep_waiting : bool
        Keep the post-burn-in waiting times (in replication order).
    """
    n = int(n_customers)
    burn_in = default_burn_in(n) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < n:
        raise ValueError("need 0 <= burn_in < n_customers")
    if not 10 <= n_batches <= 1000:
        raise ValueError("n_batches must lie in [10, 1000]")
    if n - burn_in < n_batches:
        raise ValueError("fewer post-burn-in customers than batches")
    if joint and cfg.s < 2:
        raise ValueError("joint tails need at least two servers")
    xs = np.asarray(xs, dtype=float).reshape(-1)
    pairs = [tuple(sorted((float(x), float(y)))) for x, y in joint]
    jx = np.array([p[0] for p in pairs], dtype=float)
    jy = np.array([p[1] for p in pairs], dtype=float)
    lv = np.asarray(levels, dtype=np.int64).reshape(-1)
    if np.any(lv < 0):
        raise ValueError("queue levels must be non-negative")

    def job(rep):
        return _run_replication(cfg, xs, jx, jy, lv, n, burn_in, n_batches, seed, rep,
                                keep_waiting)

    reps = range(int(replications))
    if threads > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(job, reps))
    else:
        parts = [job(r) for r in reps]

    sizes = np.tile(_batch_sizes(n - burn_in, n_batches), int(replications))
    stacked = [np.vstack([p[i] for p in parts]) for i in range(4)]
    res = SimulationResult()
    for j, x in enumerate(xs):
        res.marginal[float(x)] = batch_means(stacked[0][:, j], sizes, seed=seed,
                                             query=(float(x),), burn_in=burn_in)
    for j, pair in enumerate(pairs):
        res.joint[pair] = batch_means(stacked[1][:, j], sizes, seed=seed, query=pair,
                                      burn_in=burn_in, statistic="joint")
    for j, level in enumerate(lv):
        lvl = int(level)
        res.queue[lvl] = batch_means(stacked[2][:, j], sizes, seed=seed, query=(lvl,),
                                     burn_in=burn_in, statistic="queue")
        res.system[lvl] = batch_means(stacked[3][:, j], sizes, seed=seed, query=(lvl,),
                                      burn_in=burn_in, statistic="system")
    if keep_waiting:
        res.waiting_sample = np.concatenate([p[4] for p in parts])
    return res


def estimate_tail(cfg, x, n_customers, burn_in=None, n_batches=50, seed=0, **kw):
    """Batch-means estimate of ``P{W > x}``."""
    return estimate_tails(cfg, xs=[x], n_customers=n_customers, burn_in=burn_in,
                          n_batches=n_batches, seed=seed, **kw).marginal[float(x)]


def estimate_joint_tail(cfg, x, y, n_customers, burn_in=None, n_batches=50, seed=0, **kw):
    """Batch-means estimate of ``P{W1 > x, W2 > y}``; the pair is sorted first."""
    res = estimate_tails(cfg, joint=[(x, y)], n_customers=n_customers, burn_in=burn_in,
                         n_batches=n_batches, seed=seed, **kw)
    return next(iter(res.joint.values()))


def estimate_queue_tail(cfg, level, n_customers, burn_in=None, n_batches=50, seed=0,
                        count="queue", **kw):
    """Batch-means estimate of ``P{Q > level}`` seen by arrivals.

    ``count="queue"`` counts waiting customers; ``"system"`` counts everyone.
    """
    if count not in ("queue", "system"):
        raise ValueError("count must be 'queue' or 'system'")
    res = estimate_tails(cfg, levels=[level], n_customers=n_customers, burn_in=burn_in,
                         n_batches=n_batches, seed=seed, **kw)
    return (res.queue if count == "queue" else res.system)[int(level)]


def little_law_estimate(cfg, level, w_samples, seed, n_batches=50, replication=0):
    """Estimate ``P{W > T_n}`` from waiting times and fresh interarrival sums.

    Each waiting time is paired with an independent ``T_n``; batches follow
    the order of ``w_samples`` so their autocorrelation enters the interval.
    """
    level = int(level)
    if level < 0:
        raise ValueError("level must be non-negative")
    w = np.asarray(w_samples, dtype=float)
    if len(w) < n_batches:
        raise ValueError("fewer samples than batches")
    hits = np.empty(len(w), dtype=bool)
    if level == 0:
        hits[:] = w > 0
    elif isinstance(cfg.interarrival, Deterministic):
        hits[:] = w > level * cfg.interarrival.value
    else:
        g = rngmod.substream(seed, replication, rngmod.AUXILIARY)
        for start in range(0, len(w), CHUNK):
            m = min(CHUNK, len(w) - start)
            t = cfg.interarrival.sample(g, (m, level)).sum(axis=1)
            hits[start:start + m] = w[start:start + m] > t
    sizes = _batch_sizes(len(w), n_batches)
    edges = np.concatenate([[0], np.cumsum(sizes)])
    counts = np.add.reduceat(hits.astype(np.int64), edges[:-1])
    return batch_means(counts, sizes, seed=seed, query=(level,), statistic="little")


def estimates_agree(e1, e2):
    """True when ``|p1 - p2|`` is within the merged 95% half-width."""
    return abs(e1.p_hat - e2.p_hat) <= math.hypot(e1.half_width, e2.half_width)


def bracket_pass(estimate, predictions, slack=DEFAULT_SLACK):
    """Whether the estimate's CI meets ``[lower/slack, upper*slack]``.

    ``lower`` is the largest lower bound (or the exact value when there is
    none) and ``upper`` the smallest upper bound (likewise).  ``None`` when
    no prediction applies.
    """
    if slack < 1:
        raise ValueError("slack is a multiplicative factor >= 1")
    lo, hi = asymp.envelope(predictions)
    if lo is None and hi is None:
        return None
    ok = True
    if lo is not None:
        ok &= estimate.ci_high >= lo / slack
    if hi is not None:
        ok &= estimate.ci_low <= hi * slack
    return bool(ok)


def _ratios(estimate, predictions):
    return {p.formula_id: estimate.p_hat / p.value
            for p in predictions if p.value > 0 and p.constant_known}


def compare(cfg, xs=(), joint=(), levels=(), n_customers=10**6, burn_in=None, n_batches=50,
            seed=0, replications=1, threads=1, formula_ids=None, slack=DEFAULT_SLACK,
            delta=0.1):
    """Simulate and set estimates against every applicable prediction.

    Queue-level rows carry the Little's-law estimate as ``reference`` and
    use agreement of the two intervals as ``bracket_pass``.
    """
    info = asymp.classify_regime(cfg.a, cfg.b, cfg.s)
    res = estimate_tails(cfg, xs, joint, levels, n_customers, burn_in, n_batches, seed,
                         replications, threads, keep_waiting=bool(len(levels)))
    rows = []
    for x, est in res.marginal.items():
        preds = asymp.predict_marginal(x, cfg.a, cfg.s, cfg.service, formula_ids, delta)
        rows.append(ComparisonRow((x,), est, preds, _ratios(est, preds),
                                  bracket_pass(est, preds, slack),
                                  no_exact_formula=not info.has_exact))
    for pair, est in res.joint.items():
        preds = asymp.predict_joint(pair[0], pair[1], cfg.a, cfg.service, formula_ids) \
            if cfg.s == 2 else []
        rows.append(ComparisonRow(pair, est, preds, _ratios(est, preds),
                                  bracket_pass(est, preds, slack),
                                  no_exact_formula=not preds))
    for level, est in res.queue.items():
        ref = little_law_estimate(cfg, level, res.waiting_sample, seed,
                                  n_batches=n_batches * int(replications))
        rows.append(ComparisonRow((level,), est, [], {}, estimates_agree(est, ref),
                                  no_exact_formula=True, reference=ref))
    return rows


def _row_key(row):
    stat = row.estimate.statistic
    if stat == "joint":
        return row.query[0], row.query[1], ""
    if stat in ("queue", "system", "little"):
        return "", "", row.query[0]
    return row.query[0], "", ""


def rows_to_csv(rows):
    """Long-format CSV: one line per (row, prediction)."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(CSV_COLUMNS)
    for row in rows:
        qx, qy, lvl = _row_key(row)
        e = row.estimate
        head = [qx, qy, lvl, repr(e.p_hat), repr(e.ci_low), repr(e.ci_high)]
        bp = "" if row.bracket_pass is None else str(row.bracket_pass).lower()
        if not row.predictions:
            ref = row.reference
            if ref is not None:
                out.writerow(head + ["little_law", repr(ref.p_hat),
                                     repr(e.p_hat / ref.p_hat) if ref.p_hat > 0 else "", bp])
            else:
                out.writerow(head + ["", "", "", bp])
        for p in row.predictions:
            ratio = row.ratios.get(p.formula_id)
            out.writerow(head + [p.formula_id, repr(p.value),
                                 "" if ratio is None else repr(ratio), bp])
    return buf.getvalue()


def rows_to_json(rows, indent=2):
    return json.dumps([r.to_dict() for r in rows], indent=indent)


def estimates_to_csv(result):
    """Estimates table with drift diagnostics, one line per query."""
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(ESTIMATE_COLUMNS)
    groups = [("waiting", result.marginal), ("joint", result.joint),
              ("queue", result.queue), ("system", result.system)]
    for name, table in groups:
        for e in table.values():
            if name == "waiting":
                q = (e.query[0], "", "")
            elif name == "joint":
                q = (e.query[0], e.query[1], "")
            else:
                q = ("", "", e.query[0])
            out.writerow(list(q) + [name, repr(e.p_hat), repr(e.ci_low), repr(e.ci_high),
                                    e.n_effective, e.n_batches, e.burn_in, e.seed,
                                    e.exceedances, repr(e.drift[0]), repr(e.drift[1]),
                                    str(e.insufficient).lower()])
    return buf.getvalue()
