"""Simulation of the GI/GI/s FCFS queue through its workload vector.

The state seen by customer n is the ascending vector W_n of residual work at
the s servers; its first component is the customer's delay.  Starting from
W_1 = 0,

    W_{n+1} = R(W_n + e1 * sigma_n - i * tau_{n+1})^+

where R sorts ascending.  Besides plain paths the module builds the coupled
comparison systems used to sandwich the queue: a deterministic-input copy
with the same service times plus a reflected maxima walk, per-server
single-server majorants, the block-sum recursion for the total workload,
and the oscillating random walk describing the gap between two servers.

Comparisons that must hold exactly run on a fixed-point grid
(``FIXED_SCALE`` ticks per work unit) in int64 arithmetic, so every
inequality is checked with zero tolerance.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels, rng as rngmod
from .dist import Deterministic, DistributionSpec
from .errors import CouplingViolation, MajorantViolation
from .regime import Regime, classify

FIXED_SCALE = 2 ** 30
_FIXED_LIMIT = 2 ** 61
CHUNK = 2 ** 20


@dataclass(frozen=True)
class QueueConfig:
    s: int
    interarrival: DistributionSpec
    service: DistributionSpec

    def __post_init__(self):
        if int(self.s) != self.s or self.s < 1:
            raise ValueError("server count must be a positive integer")
        classify(self.a, self.b, self.s)

    @property
    def a(self):
        return self.interarrival.mean

    @property
    def b(self):
        return self.service.mean

    @property
    def rho(self):
        return self.b / self.a

    @property
    def regime(self):
        return classify(self.a, self.b, self.s)


@dataclass
class PathSample:
    """Per-customer output of :func:`simulate_path` (customers 1..n).

    ``queue_lengths`` is the number in system seen by each arrival;
    ``queue_waiting`` counts customers waiting for service just after the
    arrival, the arriving one included when it has to wait.
    """

    waiting_times: np.ndarray
    workload_vectors: np.ndarray = None
    queue_lengths: np.ndarray = None
    queue_waiting: np.ndarray = None
    first_index: int = 1

    def __len__(self):
        return len(self.waiting_times)


@dataclass
class CouplingTrace:
    primal: np.ndarray
    comparison: np.ndarray
    maxima: np.ndarray
    direction: str
    a_prime: float
    violations: int


@dataclass
class MajorantTrace:
    workload: np.ndarray
    labelled: np.ndarray
    single: np.ndarray
    alpha: np.ndarray
    violations: dict


def workload_vector(values):
    """Validate and return an ascending, non-negative workload vector."""
    w = np.asarray(values, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("workload vector must be a non-empty 1-D array")
    if np.any(w < 0) or np.any(np.diff(w) < 0):
        raise ValueError("workload vector must be non-negative and ascending")
    return w


def kw_step(w, sigma, tau_next):
    """One step of the recursion: add ``sigma`` to the smallest component,
    subtract ``tau_next`` everywhere, clamp at zero and re-sort."""
    if sigma < 0 or tau_next < 0:
        raise ValueError("sigma and tau_next must be non-negative")
    v = workload_vector(w).copy()
    v[0] = v[0] + sigma
    v = np.maximum(v - tau_next, 0.0)
    return np.sort(v)


def to_fixed(x):
    x = np.asarray(x, dtype=float)
    q = np.rint(x * FIXED_SCALE)
    if np.any(np.abs(q) >= _FIXED_LIMIT):
        raise OverflowError("value too large for the fixed-point grid")
    return q.astype(np.int64)


def from_fixed(q):
    return np.asarray(q, dtype=float) / FIXED_SCALE


class _Draws:
    """Service and interarrival draws for one replication, in customer order.

    The interarrival stream starts with tau_1 (before customer 1), which
    only the maxima walk uses; customer n advances with tau_{n+1}.
    """

    def __init__(self, cfg, seed, replication=0):
        self.cfg = cfg
        self.srv = rngmod.substream(seed, replication, rngmod.SERVICE)
        self.arr = rngmod.substream(seed, replication, rngmod.INTERARRIVAL)
        self.prev = float(cfg.interarrival.sample(self.arr, 1)[0])

    def chunks(self, n, chunk=CHUNK):
        done = 0
        while done < n:
            m = min(chunk, n - done)
            sig = np.asarray(self.cfg.service.sample(self.srv, m), dtype=float)
            tau_next = np.asarray(self.cfg.interarrival.sample(self.arr, m), dtype=float)
            tau = np.empty(m)
            tau[0] = self.prev
            tau[1:] = tau_next[:-1]
            self.prev = float(tau_next[-1])
            yield done, sig, tau, tau_next
            done += m


def simulate_path(cfg, n_customers, seed, record=("workload", "queue"), replication=0,
                  chunk=CHUNK):
    """Simulate customers 1..n from an empty system.

    ``record`` may contain ``"workload"`` (full vectors) and ``"queue"``
    (Palm queue lengths); waiting times are always kept.
    """
    if n_customers < 1:
        raise ValueError("need at least one customer")
    n = int(n_customers)
    s = cfg.s
    want_queue = "queue" in record
    w = np.zeros(s)
    vectors = np.empty((n, s))
    sys_q = np.empty(n, dtype=np.int64) if want_queue else None
    wait_q = np.empty(n, dtype=np.int64) if want_queue else None
    clock = np.zeros(1)
    fifo = np.empty(1024)
    head = count = 0
    for start, sig, _, tau_next in _Draws(cfg, seed, replication).chunks(n, chunk):
        stop = start + len(sig)
        if want_queue:
            fifo, head, count = _kernels.kw_path_queue(
                w, sig, tau_next, vectors[start:stop], sys_q[start:stop],
                wait_q[start:stop], clock, fifo, head, count)
        else:
            _kernels.kw_path(w, sig, tau_next, vectors[start:stop])
    return PathSample(
        waiting_times=vectors[:, 0].copy(),
        workload_vectors=vectors if "workload" in record else None,
        queue_lengths=sys_q,
        queue_waiting=wait_q,
    )


def simulate_coupled(cfg, a_prime, direction, n, seed, replication=0, check=True):
    """Primal queue against a deterministic-input copy with interarrival ``a_prime``.

    Both systems share the service sequence.  With ``direction="upper"``
    (``b/s < a_prime < a``) the maxima walk uses ``xi_n = a_prime - tau_n``
    and the trace satisfies ``W_n <= W'_n + M_n``; with ``"lower"``
    (``a_prime > a``) it uses ``xi_n = tau_n - a_prime`` and
    ``W_n >= W'_n - M_n``.  Arithmetic is exact (fixed point).

    Raises
    ------
    CouplingViolation
        If ``check`` and the pathwise inequality fails at any step.
    """
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    a, b, s = cfg.a, cfg.b, cfg.s
    if direction == "upper" and not (b / s < a_prime < a):
        raise ValueError(f"upper coupling needs b/s < a' < a, got a'={a_prime}")
    if direction == "lower" and not a_prime > a:
        raise ValueError(f"lower coupling needs a' > a, got a'={a_prime}")
    n = int(n)
    w = np.zeros(s, dtype=np.int64)
    wp = np.zeros(s, dtype=np.int64)
    m = np.zeros(1, dtype=np.int64)
    out_w = np.empty((n, s), dtype=np.int64)
    out_wp = np.empty((n, s), dtype=np.int64)
    out_m = np.empty(n, dtype=np.int64)
    ap = int(to_fixed(a_prime))
    violations = 0
    for start, sig, tau, tau_next in _Draws(cfg, seed, replication).chunks(n):
        stop = start + len(sig)
        violations += _kernels.coupled_path(
            w, wp, m, to_fixed(sig), to_fixed(tau), to_fixed(tau_next), ap,
            direction == "upper", out_w[start:stop], out_wp[start:stop], out_m[start:stop])
    trace = CouplingTrace(from_fixed(out_w), from_fixed(out_wp), from_fixed(out_m),
                          direction, float(a_prime), int(violations))
    if check and violations:
        raise CouplingViolation(f"{violations} steps violate the {direction} coupling bound")
    return trace


def simulate_majorants(cfg, n, seed, replication=0, check=True):
    """Two-server D/GI/2 path built from two independent service sequences.

    Server ``alpha_n`` (the less loaded one, ties broken by a fair coin)
    takes ``sigma_n^(alpha_n)``; two single-server D/GI/1 queues are fed
    every ``sigma^(1)`` and ``sigma^(2)`` respectively.  Checks
    ``W_n = sort(U_n)``, ``W_n1 <= min(V_n^(1), V_n^(2))`` and
    ``W_n <= sort(V_n)`` at every step, exactly.
    """
    if cfg.s != 2:
        raise ValueError("majorant construction is for two servers")
    if not isinstance(cfg.interarrival, Deterministic):
        raise ValueError("majorant construction needs deterministic interarrival times")
    n = int(n)
    a = int(to_fixed(cfg.interarrival.value))
    g1 = rngmod.substream(seed, replication, rngmod.SERVICE)
    g2 = rngmod.substream(seed, replication, rngmod.SERVICE_ALT)
    gt = rngmod.substream(seed, replication, rngmod.TIEBREAK)
    state = np.zeros(6, dtype=np.int64)
    out_w = np.empty((n, 2), dtype=np.int64)
    out_u = np.empty((n, 2), dtype=np.int64)
    out_v = np.empty((n, 2), dtype=np.int64)
    out_alpha = np.empty(n, dtype=np.int8)
    totals = np.zeros(3, dtype=np.int64)
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        sig1 = to_fixed(cfg.service.sample(g1, m))
        sig2 = to_fixed(cfg.service.sample(g2, m))
        ties = gt.random(m)
        sl = slice(done, done + m)
        totals += np.array(_kernels.majorant_path(state, sig1, sig2, ties, a, out_w[sl],
                                                  out_u[sl], out_v[sl], out_alpha[sl]))
        done += m
    violations = {"sorted": int(totals[0]), "min": int(totals[1]), "vector": int(totals[2])}
    if check and any(violations.values()):
        raise MajorantViolation(f"majorant checks failed: {violations}")
    return MajorantTrace(from_fixed(out_w), from_fixed(out_u), from_fixed(out_v),
                         out_alpha, violations)


def check_block_recursion(cfg, block, n_blocks, seed, replication=0):
    """Count failures of the block bound on the total workload Z = W_1 + W_2.

    For deterministic interarrivals ``a`` and block length ``L``,
    ``Z_{(k+1)L} <= max(2aL, Z_{kL}) + M_{kL,L} - aL`` where ``M`` is the
    single-server workload built from the block's services.  Exact.
    """
    if cfg.s != 2 or not isinstance(cfg.interarrival, Deterministic):
        raise ValueError("block recursion applies to D/GI/2")
    g = rngmod.substream(seed, replication, rngmod.SERVICE)
    sig = to_fixed(cfg.service.sample(g, int(block) * int(n_blocks)))
    w = np.zeros(2, dtype=np.int64)
    return int(_kernels.block_check(w, sig, int(to_fixed(cfg.interarrival.value)), int(block)))


def monotonicity_violations(sig, tau_next, sig_big, tau_small, s):
    """Count (n, k) where the perturbed path falls below the base path.

    ``sig_big >= sig`` and ``tau_small <= tau_next`` elementwise; the
    recursion is monotone, so the answer should always be zero.
    """
    sig, tau_next = to_fixed(sig), to_fixed(tau_next)
    sig_big, tau_small = to_fixed(sig_big), to_fixed(tau_small)
    if np.any(sig_big < sig) or np.any(tau_small > tau_next):
        raise ValueError("perturbation must raise services and/or lower interarrivals")
    n = len(sig)
    base = np.empty((n, s), dtype=np.int64)
    pert = np.empty((n, s), dtype=np.int64)
    _kernels.kw_path(np.zeros(s, dtype=np.int64), sig, tau_next, base)
    _kernels.kw_path(np.zeros(s, dtype=np.int64), sig_big, tau_small, pert)
    return int(np.count_nonzero(pert < base))


def oscillating_walk(sampler, v0, n, seed, replication=0):
    """Path V_1..V_n of the two-dimensional walk that adds ``(xi, eta)`` when
    ``V_1 <= V_2`` and ``(eta, xi)`` otherwise.

    ``sampler(rng, size)`` returns arrays ``(xi, eta)``.
    """
    g = rngmod.substream(seed, replication, rngmod.AUXILIARY)
    n = int(n)
    v = np.array(v0, dtype=float)
    if v.shape != (2,):
        raise ValueError("v0 must be a 2-vector")
    out = np.empty((n, 2))
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        xi, eta = sampler(g, m)
        _kernels.oscillating(v, np.asarray(xi, dtype=float), np.asarray(eta, dtype=float),
                             out[done:done + m])
        done += m
    return out


__all__ = [
    "QueueConfig", "PathSample", "CouplingTrace", "MajorantTrace", "Regime",
    "kw_step", "workload_vector", "simulate_path", "simulate_coupled",
    "simulate_majorants", "check_block_recursion", "monotonicity_violations",
    "oscillating_walk", "to_fixed", "from_fixed", "FIXED_SCALE",
]
