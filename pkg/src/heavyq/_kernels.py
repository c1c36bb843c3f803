"""Compiled inner loops for the workload recursion.

The same kernels run on float64 arrays (statistics) and on int64 arrays
holding fixed-point values (pathwise comparisons, where integer arithmetic
makes every inequality check exact).
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def kw_update(w, sigma, tau):
    """In-place W <- R(W + e1*sigma - i*tau)^+ on an ascending array."""
    s = w.shape[0]
    v = w[0] + sigma - tau
    if v < 0:
        v = v - v
    i = 1
    while i < s:
        u = w[i] - tau
        if u < 0:
            u = u - u
        if u < v:
            w[i - 1] = u
            i += 1
        else:
            break
    w[i - 1] = v
    for k in range(i, s):
        u = w[k] - tau
        if u < 0:
            u = u - u
        w[k] = u


@nb.njit(cache=True, nogil=True)
def kw_path(w, sig, tau_next, out):
    """Record the state seen by each customer, then advance."""
    for n in range(sig.shape[0]):
        for k in range(w.shape[0]):
            out[n, k] = w[k]
        kw_update(w, sig[n], tau_next[n])


@nb.njit(cache=True, nogil=True)
def kw_path_queue(w, sig, tau_next, out_w, out_sys, out_queue, clock, fifo, head, count):
    """Path plus Palm queue lengths.

    ``clock[0]`` holds the arrival time of the next customer.  ``fifo`` is a
    ring buffer of service-start times of customers still waiting; FCFS start
    times are non-decreasing, so the waiting set is always a FIFO suffix.
    Returns the (possibly grown) buffer with its head and count.
    """
    s = w.shape[0]
    for n in range(sig.shape[0]):
        t = clock[0]
        while count > 0 and fifo[head] <= t:
            head = (head + 1) % fifo.shape[0]
            count -= 1
        busy = 0
        for k in range(s):
            out_w[n, k] = w[k]
            if w[k] > 0:
                busy += 1
        out_sys[n] = count + busy
        waits = w[0] > 0
        out_queue[n] = count + (1 if waits else 0)
        if waits:
            if count == fifo.shape[0]:
                grown = np.empty(2 * fifo.shape[0])
                for j in range(count):
                    grown[j] = fifo[(head + j) % fifo.shape[0]]
                fifo = grown
                head = 0
            fifo[(head + count) % fifo.shape[0]] = t + w[0]
            count += 1
        kw_update(w, sig[n], tau_next[n])
        clock[0] = t + tau_next[n]
    return fifo, head, count


@nb.njit(cache=True, nogil=True)
def tail_counts(w, sig, tau_next, first, burn_in, n_eff, n_batches,
                xs, jx, jy, levels, clock, fifo, head, count,
                marg, joint, queue, sysq, wsample):
    """Accumulate per-batch exceedance counts over one chunk of customers.

    ``first`` is the global index of the chunk's first customer.  Rows of the
    count matrices are batches.  ``wsample`` (length >= chunk, or 0) receives
    the waiting times of post-burn-in customers.
    """
    s = w.shape[0]
    track_queue = levels.shape[0] > 0
    stored = 0
    for n in range(sig.shape[0]):
        g = first + n
        t = clock[0]
        q_wait = 0
        q_sys = 0
        if track_queue:
            while count > 0 and fifo[head] <= t:
                head = (head + 1) % fifo.shape[0]
                count -= 1
            busy = 0
            for k in range(s):
                if w[k] > 0:
                    busy += 1
            q_sys = count + busy
            q_wait = count + (1 if w[0] > 0 else 0)
        if g >= burn_in:
            b = ((g - burn_in) * n_batches) // n_eff
            for j in range(xs.shape[0]):
                if w[0] > xs[j]:
                    marg[b, j] += 1
            if s > 1:
                for j in range(jx.shape[0]):
                    if w[0] > jx[j] and w[1] > jy[j]:
                        joint[b, j] += 1
            for j in range(levels.shape[0]):
                if q_wait > levels[j]:
                    queue[b, j] += 1
                if q_sys > levels[j]:
                    sysq[b, j] += 1
            if wsample.shape[0] > 0:
                wsample[stored] = w[0]
                stored += 1
        if track_queue and w[0] > 0:
            if count == fifo.shape[0]:
                grown = np.empty(2 * fifo.shape[0])
                for j in range(count):
                    grown[j] = fifo[(head + j) % fifo.shape[0]]
                fifo = grown
                head = 0
            fifo[(head + count) % fifo.shape[0]] = t + w[0]
            count += 1
        kw_update(w, sig[n], tau_next[n])
        clock[0] = t + tau_next[n]
    return fifo, head, count, stored


@nb.njit(cache=True, nogil=True)
def coupled_path(w, wp, m, sig, tau, tau_next, a_prime, upper, out_w, out_wp, out_m):
    """Run the primal and deterministic-input systems on shared services.

    ``tau[n]`` is the interarrival time that precedes customer ``n`` and
    drives the maxima walk; ``tau_next[n]`` is the one that follows it.
    Returns the number of steps where the pathwise bound failed.
    """
    s = w.shape[0]
    violations = 0
    for n in range(sig.shape[0]):
        if upper:
            xi = a_prime - tau[n]
        else:
            xi = tau[n] - a_prime
        mm = m[0] + xi
        if mm < 0:
            mm = mm - mm
        m[0] = mm
        for k in range(s):
            out_w[n, k] = w[k]
            out_wp[n, k] = wp[k]
            if upper:
                if w[k] > wp[k] + mm:
                    violations += 1
                    break
            else:
                if w[k] < wp[k] - mm:
                    violations += 1
                    break
        out_m[n] = mm
        kw_update(w, sig[n], tau_next[n])
        kw_update(wp, sig[n], a_prime)
    return violations


@nb.njit(cache=True, nogil=True)
def majorant_path(state, sig1, sig2, ties, a, out_w, out_u, out_single, out_alpha):
    """Two-server system fed by per-server service sequences.

    ``state`` = [W1, W2, U1, U2, V1, V2]: sorted workload, server-labelled
    workload, and the two single-server queues.  Returns violation counts of
    (W == sorted U, W_1 <= min(V), W <= sorted V componentwise).
    """
    bad_sort = 0
    bad_min = 0
    bad_vec = 0
    w = state[0:2]
    for n in range(sig1.shape[0]):
        u1 = state[2]
        u2 = state[3]
        v1 = state[4]
        v2 = state[5]
        out_w[n, 0] = w[0]
        out_w[n, 1] = w[1]
        out_u[n, 0] = u1
        out_u[n, 1] = u2
        out_single[n, 0] = v1
        out_single[n, 1] = v2
        lo_u = u1 if u1 <= u2 else u2
        hi_u = u2 if u1 <= u2 else u1
        if w[0] != lo_u or w[1] != hi_u:
            bad_sort += 1
        lo_v = v1 if v1 <= v2 else v2
        hi_v = v2 if v1 <= v2 else v1
        if w[0] > lo_v:
            bad_min += 1
        if w[0] > lo_v or w[1] > hi_v:
            bad_vec += 1
        if u1 < u2:
            alpha = 1
        elif u1 > u2:
            alpha = 2
        else:
            alpha = 1 if ties[n] < 0.5 else 2
        out_alpha[n] = alpha
        sigma = sig1[n] if alpha == 1 else sig2[n]
        if alpha == 1:
            u1 = u1 + sigma
        else:
            u2 = u2 + sigma
        u1 = u1 - a
        u2 = u2 - a
        state[2] = u1 if u1 > 0 else u1 - u1
        state[3] = u2 if u2 > 0 else u2 - u2
        v1 = v1 + sig1[n] - a
        v2 = v2 + sig2[n] - a
        state[4] = v1 if v1 > 0 else v1 - v1
        state[5] = v2 if v2 > 0 else v2 - v2
        kw_update(w, sigma, a)
    return bad_sort, bad_min, bad_vec


@nb.njit(cache=True, nogil=True)
def block_check(w, sig, a, block):
    """Count blocks where Z_(k+1)L > max(2aL, Z_kL) + M_(kL,L) - aL."""
    n_blocks = sig.shape[0] // block
    violations = 0
    for k in range(n_blocks):
        z0 = w[0] + w[1]
        m = a - a
        for i in range(block):
            sigma = sig[k * block + i]
            m = m + sigma - a
            if m < 0:
                m = m - m
            kw_update(w, sigma, a)
        bound = 2 * a * block
        if z0 > bound:
            bound = z0
        if w[0] + w[1] > bound + m - a * block:
            violations += 1
    return violations


@nb.njit(cache=True, nogil=True)
def oscillating(v, xi, eta, out):
    for n in range(xi.shape[0]):
        out[n, 0] = v[0]
        out[n, 1] = v[1]
        if v[0] <= v[1]:
            v[0] += xi[n]
            v[1] += eta[n]
        else:
            v[0] += eta[n]
            v[1] += xi[n]
