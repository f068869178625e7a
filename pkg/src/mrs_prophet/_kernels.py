"""Compiled Monte Carlo kernels working in rank space.

Under JITTER tie-breaking the k+n draws are exchangeable with distinct keys,
so a run is determined by a uniformly random assignment of global ranks
1..N (N = k+n) to stream positions.  Ranks are revealed lazily: a value's
rank is drawn when it is read, and a rank's sample/future status only when a
subset scan touches it, so a trial costs O(tau + scan length) work.
Accepted ranks are mapped back to quantiles by sampling the matching uniform order statistic.

Randomness comes from a SplitMix64 stream keyed by (seed, trial), which
makes every trial reproducible independently of batch boundaries.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TRIAL_MUL = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def trial_state(seed, trial):
    """Initial generator state for one trial (both arguments uint64)."""
    return _mix(_mix(seed) + np.uint64(trial) * _TRIAL_MUL)


@njit(cache=True, inline="always")
def next_uniform(state):
    """Return (new_state, u) with u uniform on [0, 1) at 53-bit resolution."""
    state = state + _GOLDEN
    return state, float(_mix(state) >> _S11) * _INV53


@njit(cache=True, inline="always")
def next_below(state, bound):
    """Uniform integer in [0, bound)."""
    state, u = next_uniform(state)
    j = int(u * bound)
    if j >= bound:
        j = bound - 1
    return state, j


@njit(cache=True)
def next_normal(state):
    state, u1 = next_uniform(state)
    state, u2 = next_uniform(state)
    return state, math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True)
def next_gamma(state, alpha):
    """Gamma(alpha, 1) by Marsaglia-Tsang (boosted for alpha < 1)."""
    boost = 1.0
    if alpha < 1.0:
        state, u = next_uniform(state)
        boost = (1.0 - u) ** (1.0 / alpha)
        alpha += 1.0
    d = alpha - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        state, x = next_normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        state, u = next_uniform(state)
        if math.log(1.0 - u) < 0.5 * x * x + d - d * v + d * math.log(v):
            return state, d * v * boost


@njit(cache=True)
def next_beta(state, a, b):
    state, x = next_gamma(state, a)
    state, y = next_gamma(state, b)
    return state, x / (x + y)


# Rank status codes.  A rank is "unresolved" until a scan or a draw touches it;
# unresolved ranks are a uniformly random mix of the unrevealed samples and the
# unrevealed future values, so their status can be revealed hypergeometrically.
_SAMPLE = 1
_PAST = 2
_FUTURE = 3


@njit(cache=True, inline="always")
def _status(stat, stamp, tag, r):
    return stat[r] if stamp[r] == tag else 0


@njit(cache=True, inline="always")
def _resolve(state, stat, stamp, tag, r, counts, fut):
    """Reveal the status of unresolved rank r.

    counts[0]: unrevealed samples, counts[1]: unrevealed future values,
    counts[2]: length of the revealed-future list ``fut``.
    """
    state, u = next_uniform(state)
    stamp[r] = tag
    if u * (counts[0] + counts[1]) < counts[0]:
        stat[r] = _SAMPLE
        counts[0] -= 1
    else:
        stat[r] = _FUTURE
        counts[1] -= 1
        fut[counts[2]] = r
        counts[2] += 1
    return state


@njit(cache=True, inline="always")
def _draw_value_rank(state, stat, stamp, tag, total, counts, fut):
    """Rank of the next value: uniform over all ranks still owed to future values."""
    nf = counts[2]
    state, u = next_uniform(state)
    if u * (nf + counts[1]) < nf:
        state, j = next_below(state, nf)
        r = fut[j]
        last = fut[nf - 1]
        fut[j] = last
        counts[2] = nf - 1
    else:
        while True:
            state, j = next_below(state, total)
            r = j + 1
            if stamp[r] != tag:
                break
        stamp[r] = tag
        counts[1] -= 1
    stat[r] = _PAST
    return state, r


@njit(cache=True, inline="always")
def _subset_max(state, stat, stamp, tag, total, seen_count, q, counts, fut):
    """Max rank of a uniform q-subset of the seen ranks (0 if q = 0).

    Walks ranks downward; each seen rank is included with probability
    q / (number of seen ranks not yet passed), so the first inclusion is
    the subset maximum.
    """
    if q <= 0:
        return state, 0
    t = seen_count
    r = total
    while r > 0:
        s = _status(stat, stamp, tag, r)
        if s == 0:
            state = _resolve(state, stat, stamp, tag, r, counts, fut)
            s = stat[r]
        if s == _SAMPLE or s == _PAST:
            state, u = next_uniform(state)
            if u * t < q:
                return state, r
            t -= 1
        r -= 1
    return state, 0


@njit(cache=True, inline="always")
def _top_future(state, stat, stamp, tag, total, counts, fut):
    """Highest rank held by a value not yet read (0 if none)."""
    if counts[1] + counts[2] == 0:
        return state, 0
    r = total
    while r > 0:
        s = _status(stat, stamp, tag, r)
        if s == 0:
            state = _resolve(state, stat, stamp, tag, r, counts, fut)
            s = stat[r]
        if s == _FUTURE:
            return state, r
        r -= 1
    return state, 0


@njit(cache=True)
def _order_uniforms(state, r_acc, r_max, total):
    """Sample (U_acc, U_max) for ranks r_acc <= r_max among ``total`` uniforms."""
    state, u_max = next_beta(state, float(r_max), float(total + 1 - r_max))
    if r_acc == r_max:
        return state, u_max, u_max
    state, w = next_beta(state, float(r_acc), float(r_max - r_acc))
    return state, u_max * w, u_max


@njit(cache=True, nogil=True)
def mrs_trials(f, k, seed, trial0, trials, out_stop, out_uacc, out_umax):
    """Literal MRS rule in rank space.

    out_stop[t] is the 1-based stop step (0 if the rule never stops);
    out_uacc[t] the accepted value's uniform (nan if no stop);
    out_umax[t] the uniform of max(X_1..X_n).
    """
    n = f.shape[0]
    total = k + n
    stat = np.zeros(total + 1, np.int64)
    stamp = np.zeros(total + 1, np.int64)
    fut = np.zeros(total + 1, np.int64)
    counts = np.zeros(3, np.int64)
    for tr in range(trials):
        tag = tr + 1
        state = trial_state(np.uint64(seed), np.uint64(trial0 + tr))
        counts[0] = k
        counts[1] = n
        counts[2] = 0
        stop = 0
        r_acc = 0
        max_x = 0
        for i in range(n):
            state, thr = _subset_max(state, stat, stamp, tag, total, k + i, f[i], counts, fut)
            state, r = _draw_value_rank(state, stat, stamp, tag, total, counts, fut)
            if r > max_x:
                max_x = r
            if r > thr:
                stop = i + 1
                r_acc = r
                break
        if stop > 0:
            state, top = _top_future(state, stat, stamp, tag, total, counts, fut)
            if top > max_x:
                max_x = top
            state, ua, um = _order_uniforms(state, r_acc, max_x, total)
            out_uacc[tr] = ua
        else:
            state, ua, um = _order_uniforms(state, max_x, max_x, total)
            out_uacc[tr] = np.nan
        out_stop[tr] = stop
        out_umax[tr] = um


@njit(cache=True)
def _max_uniform(state, count):
    """Max of ``count`` uniforms (0 when count = 0)."""
    if count <= 0:
        return state, 0.0
    state, v = next_uniform(state)
    return state, (1.0 - v) ** (1.0 / count)


@njit(cache=True)
def _block_value(state, gen, gcount, bcnt, bcap, b, idx):
    """idx-th largest (0-based) of block b, generating order statistics on demand.

    Block b holds bcnt[b] i.i.d. uniforms on [0, bcap[b]).
    """
    while gcount[b] <= idx:
        g = gcount[b]
        prev = bcap[b] if g == 0 else gen[b, g - 1]
        state, v = next_uniform(state)
        gen[b, g] = prev * (1.0 - v) ** (1.0 / (bcnt[b] - g))
        gcount[b] = g + 1
    return state, gen[b, idx]


@njit(cache=True)
def _heap_push(hv, hb, hp, size, v, b, p):
    i = size
    hv[i] = v
    hb[i] = b
    hp[i] = p
    while i > 0:
        parent = (i - 1) // 2
        if hv[parent] >= hv[i]:
            break
        hv[i], hv[parent] = hv[parent], hv[i]
        hb[i], hb[parent] = hb[parent], hb[i]
        hp[i], hp[parent] = hp[parent], hp[i]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(hv, hb, hp, size):
    v, b, p = hv[0], hb[0], hp[0]
    size -= 1
    hv[0], hb[0], hp[0] = hv[size], hb[size], hp[size]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and hv[c + 1] > hv[c]:
            c += 1
        if hv[i] >= hv[c]:
            break
        hv[i], hv[c] = hv[c], hv[i]
        hb[i], hb[c] = hb[c], hb[i]
        hp[i], hp[c] = hp[c], hp[i]
        i = c
    return v, b, p, size


@njit(cache=True)
def _geometric_wait(state, thr, cap):
    """Number of fresh uniforms read until one exceeds thr, capped at cap + 1."""
    if thr <= 0.0:
        return state, 1
    state, v = next_uniform(state)
    lt = math.log(thr)
    if lt == 0.0:
        return state, cap + 1
    w = math.log(1.0 - v) / lt
    if w >= cap:
        return state, cap + 1
    return state, 1 + int(w)


@njit(cache=True, nogil=True)
def streaming_trials(seg_start, seg_q, n, k, seed, trial0, trials, out_stop, out_uacc, out_umax):
    """Streaming rule: fresh subset maximum at each segment start, then a running max.

    seg_start holds 0-based value indices where segments begin (first is 0),
    seg_q the subset size drawn at each start.

    Works with values (as uniforms) rather than ranks.  Inside a segment the
    running threshold only changes at acceptance, so the wait is geometric
    and the rejected values form a block of i.i.d. uniforms below it.  Each
    segment-start threshold walks the seen values downward through a heap of
    block maxima, including each with probability q / (values not yet passed).
    """
    nseg = seg_start.shape[0]
    nblk = nseg + 1
    width = 64
    gen = np.zeros((nblk, width))
    gcount = np.zeros(nblk, np.int64)
    bcnt = np.zeros(nblk, np.int64)
    bcap = np.zeros(nblk)
    hv = np.zeros(nblk)
    hb = np.zeros(nblk, np.int64)
    hp = np.zeros(nblk, np.int64)
    for tr in range(trials):
        state = trial_state(np.uint64(seed), np.uint64(trial0 + tr))
        nb = 0
        if k > 0:
            bcnt[0] = k
            bcap[0] = 1.0
            gcount[0] = 0
            nb = 1
        first_x = nb
        stop = 0
        u_acc = 0.0
        for s in range(nseg):
            j0 = seg_start[s]
            seg_len = (seg_start[s + 1] if s + 1 < nseg else n) - j0
            q = seg_q[s]
            seen = k + j0
            thr = 0.0
            if q > 0 and seen > 0:
                size = 0
                for b in range(nb):
                    state, v = _block_value(state, gen, gcount, bcnt, bcap, b, 0)
                    size = _heap_push(hv, hb, hp, size, v, b, 0)
                t = seen
                while size > 0:
                    v, b, p, size = _heap_pop(hv, hb, hp, size)
                    state, u = next_uniform(state)
                    if u * t < q:
                        thr = v
                        break
                    t -= 1
                    if p + 1 < bcnt[b]:
                        if p + 1 >= gen.shape[1]:
                            grown = np.zeros((nblk, 2 * gen.shape[1]))
                            grown[:, :gen.shape[1]] = gen
                            gen = grown
                        state, w = _block_value(state, gen, gcount, bcnt, bcap, b, p + 1)
                        size = _heap_push(hv, hb, hp, size, w, b, p + 1)
            state, wait = _geometric_wait(state, thr, seg_len)
            if wait <= seg_len:
                stop = j0 + wait
                state, u = next_uniform(state)
                u_acc = thr + (1.0 - thr) * u
                if wait > 1:
                    bcnt[nb] = wait - 1
                    bcap[nb] = thr
                    gcount[nb] = 0
                    nb += 1
                break
            bcnt[nb] = seg_len
            bcap[nb] = thr
            gcount[nb] = 0
            nb += 1
        u_max = 0.0
        for b in range(first_x, nb):
            state, v = _block_value(state, gen, gcount, bcnt, bcap, b, 0)
            if v > u_max:
                u_max = v
        if stop > 0:
            if u_acc > u_max:
                u_max = u_acc
            state, rest = _max_uniform(state, n - stop)
            if rest > u_max:
                u_max = rest
            out_uacc[tr] = u_acc
        else:
            out_uacc[tr] = np.nan
        out_stop[tr] = stop
        out_umax[tr] = u_max


@njit(cache=True, nogil=True)
def secretary_trials(n, k, m, seed, trial0, trials, out_stop, out_uacc, out_umax):
    """Skip m values, then accept the first value above everything seen.

    Values below the running maximum do not change it, so the wait for the
    first exceedance is geometric and the trial costs O(1).
    """
    for tr in range(trials):
        state = trial_state(np.uint64(seed), np.uint64(trial0 + tr))
        state, s_max = _max_uniform(state, k)
        state, x_skip = _max_uniform(state, m)
        thr = max(s_max, x_skip)
        state, wait = _geometric_wait(state, thr, n - m)
        tau = m + wait
        if tau <= n:
            state, u = next_uniform(state)
            u_acc = thr + (1.0 - thr) * u
            state, mid = _max_uniform(state, wait - 1)
            state, rest = _max_uniform(state, n - tau)
            out_stop[tr] = tau
            out_uacc[tr] = u_acc
            out_umax[tr] = max(x_skip, thr * mid, u_acc, rest)
        else:
            state, mid = _max_uniform(state, n - m)
            out_stop[tr] = 0
            out_uacc[tr] = np.nan
            out_umax[tr] = max(x_skip, thr * mid)


@njit(cache=True, nogil=True)
def subset_trials(m, q, seed, trial0, trials, out_mask):
    """Selection bitmask of the single-pass s/t sampler, one per trial."""
    for tr in range(trials):
        state = trial_state(np.uint64(seed), np.uint64(trial0 + tr))
        s = q
        t = m
        mask = 0
        for pos in range(m):
            state, u = next_uniform(state)
            if u * t < s:
                mask |= 1 << pos
                s -= 1
            t -= 1
        out_mask[tr] = mask
