"""Compiled inner loops for the forward and Viterbi recursions.

Binomial and Poisson rows are generated around their mode by ratio
recurrences and cut once they fall below ``BAND_CUT`` times the mode, so
each step costs O(states x band) instead of O(states^2).
"""

import math

import numpy as np
from numba import njit

BAND_CUT = 1e-80
# states holding less than this fraction of the column maximum are skipped
MASS_CUT = 1e-80
# a step whose normalizer falls below this is recomputed without cuts
RETRY_BELOW = 1e-8


@njit(cache=True)
def _binom_band(j, p, lf, buf, cut):
    """Fill buf[lo..hi] with the Binomial(j, p) pmf; return (lo, hi)."""
    if j == 0 or p == 0.0:
        buf[0] = 1.0
        return 0, 0
    if p == 1.0:
        buf[j] = 1.0
        return j, j
    odds = p / (1.0 - p)
    mode = int((j + 1) * p)
    if mode > j:
        mode = j
    log_mode = (lf[j] - lf[mode] - lf[j - mode] + mode * math.log(p)
                + (j - mode) * math.log1p(-p))
    scale = math.exp(log_mode)
    buf[mode] = scale
    hi = mode
    v = 1.0
    while hi < j:
        v *= (j - hi) / (hi + 1.0) * odds
        if v < cut:
            break
        hi += 1
        buf[hi] = v * scale
    lo = mode
    v = 1.0
    while lo > 0:
        v *= lo / ((j - lo + 1.0) * odds)
        if v < cut:
            break
        lo -= 1
        buf[lo] = v * scale
    return lo, hi


@njit(cache=True)
def _poisson_band(lam, limit, lf, buf, cut):
    """Fill buf[lo..hi] (hi <= limit) with the Poisson(lam) pmf."""
    if lam == 0.0:
        buf[0] = 1.0
        return 0, 0
    mode = int(lam)
    if mode > limit:
        mode = limit
    scale = math.exp(mode * math.log(lam) - lam - lf[mode])
    buf[mode] = scale
    hi = mode
    v = 1.0
    while hi < limit:
        v *= lam / (hi + 1.0)
        if v < cut:
            break
        hi += 1
        buf[hi] = v * scale
    lo = mode
    v = 1.0
    while lo > 0:
        v *= lo / lam
        if v < cut:
            break
        lo -= 1
        buf[lo] = v * scale
    return lo, hi


@njit(cache=True)
def _emission(x, y, omega, log_omega, log_q, log_1mq, lf):
    if x == y:
        return (1.0 - omega) + omega * math.exp(x * log_q)
    return math.exp(log_omega + lf[x] - lf[y] - lf[x - y]
                    + y * log_q + (x - y) * log_1mq)


@njit(cache=True)
def binomial_rows(alpha, size, lf, cut):
    """Row j holds the banded Binomial(j, alpha) pmf over rows_lo[j]..rows_hi[j]."""
    rows = np.zeros((size, size))
    lo = np.zeros(size, dtype=np.int64)
    hi = np.zeros(size, dtype=np.int64)
    for j in range(size):
        lo[j], hi[j] = _binom_band(j, alpha, lf, rows[j], cut)
    return rows, lo, hi


@njit(cache=True)
def _predict(f, lo_state, rows, rlo, rhi, lam, lf, surv, pred, pbuf, cut):
    """pred = distribution of alpha o X + Poisson(lam) given X ~ f."""
    size = f.shape[0]
    max_state = size - 1
    mass_cut = MASS_CUT if cut > 0.0 else 0.0
    surv[:] = 0.0
    floor = 0.0
    for j in range(lo_state, size):
        if f[j] > floor:
            floor = f[j]
    floor *= mass_cut
    for j in range(lo_state, size):
        fj = f[j]
        if fj <= floor:
            continue
        row = rows[j]
        for s in range(rlo[j], rhi[j] + 1):
            surv[s] += fj * row[s]
    pred[:] = 0.0
    wlo, whi = _poisson_band(lam, max_state, lf, pbuf, cut)
    floor = 0.0
    for s in range(size):
        if surv[s] > floor:
            floor = surv[s]
    floor *= mass_cut
    for s in range(size):
        ss = surv[s]
        if ss <= floor:
            continue
        top = whi if s + whi <= max_state else max_state - s
        for w in range(wlo, top + 1):
            pred[s + w] += ss * pbuf[w]


@njit(cache=True)
def forward_scaled(counts, alpha, omega, lam, q, initial, lf, filtered, store):
    """Scaled forward pass returning (loglik, per-step log normalizers).

    When ``store`` is true, row t of ``filtered`` receives the normalized
    forward column.
    """
    n = counts.shape[0]
    size = initial.shape[0]
    f = np.zeros(size)
    prev = np.zeros(size)
    surv = np.zeros(size)
    pred = np.zeros(size)
    pbuf = np.zeros(size)
    log_c = np.full(n, -np.inf)
    log_omega = math.log(omega)
    rows, rlo, rhi = binomial_rows(alpha, size, lf, BAND_CUT)
    full_ready = False
    full, flo, fhi = rows, rlo, rhi
    total = 0.0
    for t in range(n):
        y = counts[t]
        log_q = math.log(q[t])
        log_1mq = math.log1p(-q[t])
        prev[:] = f
        for attempt in range(2):
            if t == 0:
                pred[:] = initial
            elif attempt == 0:
                _predict(prev, counts[t - 1], rows, rlo, rhi, lam[t], lf,
                         surv, pred, pbuf, BAND_CUT)
            else:
                if not full_ready:
                    full, flo, fhi = binomial_rows(alpha, size, lf, 0.0)
                    full_ready = True
                _predict(prev, counts[t - 1], full, flo, fhi, lam[t], lf,
                         surv, pred, pbuf, 0.0)
            c = 0.0
            for x in range(size):
                if x < y or pred[x] == 0.0:
                    f[x] = 0.0
                    continue
                f[x] = pred[x] * _emission(x, y, omega, log_omega, log_q, log_1mq, lf)
                c += f[x]
            if c > RETRY_BELOW or t == 0:
                break
        if not c > 0.0:
            return -np.inf, log_c
        inv = 1.0 / c
        for x in range(size):
            f[x] *= inv
        if store:
            filtered[t, :] = f
        log_c[t] = math.log(c)
        total += log_c[t]
    return total, log_c


@njit(cache=True)
def _viterbi_step(delta, new, back_t, y_prev, y, rows, rlo, rhi, lam, lf, pbuf,
                  row, cut):
    """new[i] = max_j delta[j] + log P(i | j); smallest j wins ties."""
    size = delta.shape[0]
    max_state = size - 1
    new[:] = -np.inf
    wlo, whi = _poisson_band(lam, max_state, lf, pbuf, cut)
    for j in range(y_prev, size):
        dj = delta[j]
        if dj == -np.inf:
            continue
        lo = rlo[j]
        hi = rhi[j]
        brow = rows[j]
        i_lo = lo + wlo
        if i_lo < y:
            i_lo = y
        i_hi = hi + whi
        if i_hi > max_state:
            i_hi = max_state
        row[i_lo:i_hi + 1] = 0.0
        for s in range(lo, hi + 1):
            bs = brow[s]
            for w in range(wlo, whi + 1):
                i = s + w
                if i > i_hi:
                    break
                if i >= i_lo:
                    row[i] += bs * pbuf[w]
        for i in range(i_lo, i_hi + 1):
            if row[i] > 0.0:
                cand = dj + math.log(row[i])
                if cand > new[i]:
                    new[i] = cand
                    back_t[i] = j


@njit(cache=True)
def viterbi_path(counts, alpha, omega, lam, q, initial, lf):
    """Max-product recursion in log space with smallest-state tie-breaks."""
    n = counts.shape[0]
    size = initial.shape[0]
    delta = np.full(size, -np.inf)
    new = np.full(size, -np.inf)
    back = np.zeros((n, size), dtype=np.int64)
    pbuf = np.zeros(size)
    row = np.zeros(size)
    rows, rlo, rhi = binomial_rows(alpha, size, lf, BAND_CUT)
    full_ready = False
    full, flo, fhi = rows, rlo, rhi
    log_omega = math.log(omega)
    log_q = math.log(q[0])
    log_1mq = math.log1p(-q[0])
    y = counts[0]
    for x in range(size):
        if x >= y and initial[x] > 0.0:
            delta[x] = math.log(initial[x]) + math.log(
                _emission(x, y, omega, log_omega, log_q, log_1mq, lf))
    for t in range(1, n):
        y = counts[t]
        log_q = math.log(q[t])
        log_1mq = math.log1p(-q[t])
        _viterbi_step(delta, new, back[t], counts[t - 1], y, rows, rlo, rhi,
                      lam[t], lf, pbuf, row, BAND_CUT)
        reached = False
        for x in range(y, size):
            if new[x] > -np.inf:
                reached = True
                break
        if not reached:
            if not full_ready:
                full, flo, fhi = binomial_rows(alpha, size, lf, 0.0)
                full_ready = True
            _viterbi_step(delta, new, back[t], counts[t - 1], y, full, flo, fhi,
                          lam[t], lf, pbuf, row, 0.0)
        for x in range(size):
            if x < y or new[x] == -np.inf:
                delta[x] = -np.inf
            else:
                delta[x] = new[x] + math.log(
                    _emission(x, y, omega, log_omega, log_q, log_1mq, lf))
    best = -np.inf
    last = -1
    for x in range(size):
        if delta[x] > best:
            best = delta[x]
            last = x
    path = np.zeros(n, dtype=np.int64)
    if last < 0:
        return path, best
    path[n - 1] = last
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best
