"""Transition and emission probabilities of the hidden INAR(1) model."""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import gammaln, logsumexp

from .core import ModelParams, ValidationError


class LogFactorials:
    """Table of log(n!) that grows on demand."""

    def __init__(self, size: int = 1024):
        self._lock = threading.Lock()
        self._table = gammaln(np.arange(size, dtype=float) + 1.0)

    def upto(self, n: int) -> np.ndarray:
        table = self._table
        if n < table.size:
            return table[: n + 1]
        with self._lock:
            if n >= self._table.size:
                size = max(2 * self._table.size, n + 1)
                self._table = gammaln(np.arange(size, dtype=float) + 1.0)
            return self._table[: n + 1]

    def __getitem__(self, n):
        return self.upto(int(np.max(n)))[n]


LOG_FACTORIAL = LogFactorials()


def truncation_bound(counts, factor: float = 1.5, minimum: int = 0) -> int:
    """Largest latent state kept: ceil(factor * max count), at least ``minimum``."""
    top = int(np.max(counts))
    bound = max(int(math.ceil(factor * top)), top, minimum)
    if bound < 1:
        bound = 1
    return bound


def q_values(params: ModelParams, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    arg = 2.0 * np.pi * n / 7.0
    eta = (params.gamma0 + params.gamma1 * n + params.gamma2 * np.sin(arg)
           + params.gamma3 * np.cos(arg))
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def q_at(params: ModelParams, n: int) -> float:
    if n < 1:
        raise ValidationError("day index starts at 1")
    return float(q_values(params, n))


def log_poisson_pmf(w, lam: float) -> np.ndarray:
    w = np.asarray(w)
    if lam == 0.0:
        return np.where(w == 0, 0.0, -np.inf)
    return w * math.log(lam) - lam - LOG_FACTORIAL[w]


def log_binom_pmf(k, n, p: float) -> np.ndarray:
    k, n = np.broadcast_arrays(np.asarray(k), np.asarray(n))
    valid = (k >= 0) & (k <= n)
    kk = np.where(valid, k, 0)
    nn = np.where(valid, n, 0)
    lf = LOG_FACTORIAL.upto(int(nn.max()) if nn.size else 0)
    log_p = math.log(p) if p > 0 else -np.inf
    log_q = math.log1p(-p) if p < 1 else -np.inf
    with np.errstate(invalid="ignore"):
        term_k = np.where(kk > 0, kk * log_p, 0.0)
        term_rest = np.where(nn > kk, (nn - kk) * log_q, 0.0)
    out = lf[nn] - lf[kk] - lf[nn - kk] + term_k + term_rest
    return np.where(valid, out, -np.inf)


def log_transition_pmf(alpha: float, lam: float, j: int, i: int) -> float:
    """log P(X_n = i | X_{n-1} = j): survivors Binomial(j, alpha) plus Poisson(lam)."""
    if i < 0 or j < 0:
        return -math.inf
    ks = np.arange(0, min(i, j) + 1)
    terms = log_binom_pmf(ks, j, alpha) + log_poisson_pmf(i - ks, lam)
    return float(logsumexp(terms))


def transition_pmf(params: ModelParams, lambda_n: float, j: int, i: int) -> float:
    if lambda_n < 0:
        raise ValidationError("innovation mean must be nonnegative")
    return math.exp(log_transition_pmf(params.alpha, lambda_n, j, i))


def poisson_vector(lam: float, size: int) -> np.ndarray:
    return np.exp(log_poisson_pmf(np.arange(size), lam))


def poisson_matrix(lam: np.ndarray, size: int) -> np.ndarray:
    """Row t holds the Poisson(lam[t]) pmf on 0..size-1."""
    lam = np.asarray(lam, dtype=float)[:, None]
    w = np.arange(size)[None, :]
    lf = LOG_FACTORIAL.upto(size - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = np.where(w > 0, w * np.log(lam), 0.0) - lam - lf[None, :]
    return np.exp(log_p)


def binomial_matrix(p: float, max_state: int) -> np.ndarray:
    """B[j, s] = P(Binomial(j, p) = s) for 0 <= s, j <= max_state."""
    idx = np.arange(max_state + 1)
    lf = LOG_FACTORIAL.upto(max_state)
    rest = np.subtract.outer(idx, idx)
    lower = rest >= 0
    rest[~lower] = 0
    log_p = math.log(p) if p > 0 else -np.inf
    log_q = math.log1p(-p) if p < 1 else -np.inf
    with np.errstate(invalid="ignore"):
        log_b = (lf[:, None] - lf[None, :] - lf[rest]
                 + np.where(idx > 0, idx * log_p, 0.0)[None, :]
                 + np.where(rest > 0, rest * log_q, 0.0))
    log_b[~lower] = -np.inf
    return np.exp(log_b)


def transition_matrix(alpha: float, lam: float, max_state: int,
                      binom: np.ndarray | None = None) -> np.ndarray:
    """Dense T[j, i] = P(X_n = i | X_{n-1} = j) on 0..max_state (linear space)."""
    size = max_state + 1
    if binom is None:
        binom = binomial_matrix(alpha, max_state)
    pois = poisson_vector(lam, size)
    # T = B @ L with L[s, i] = pois[i - s] for i >= s
    upper = toeplitz(np.r_[pois[0], np.zeros(size - 1)], pois)
    return binom @ upper


def log_emission_pmf(omega: float, q: float, x, y) -> np.ndarray:
    """log P(Y = y | X = x) for the thinned-with-probability-omega report."""
    x = np.asarray(x)
    y = np.asarray(y)
    x, y = np.broadcast_arrays(x, y)
    out = np.full(x.shape, -np.inf)
    eq = x == y
    lt = y < x
    if np.any(eq):
        xe = x[eq]
        # (1 - omega) + omega q^x, computed as log-sum-exp of both terms
        out[eq] = np.logaddexp(math.log1p(-omega), math.log(omega) + xe * math.log(q))
    if np.any(lt):
        xs, ys = x[lt], y[lt]
        out[lt] = math.log(omega) + log_binom_pmf(ys, xs, q)
    return out


def emission_pmf(params: ModelParams, n: int, x: int, y: int) -> float:
    q = q_at(params, n)
    return float(np.exp(log_emission_pmf(params.omega, q, x, y)))


def emission_vector(omega: float, q: float, y: int, max_state: int) -> np.ndarray:
    """P(Y = y | X = x) for x = 0..max_state."""
    return np.exp(log_emission_pmf(omega, q, np.arange(max_state + 1), y))


def log_emission_matrix(omega: float, q: np.ndarray, y: np.ndarray,
                        max_state: int) -> np.ndarray:
    """Row n holds log P(Y_n = y[n] | X_n = x) for x = 0..max_state."""
    q = np.asarray(q, dtype=float)[:, None]
    y = np.asarray(y)[:, None]
    x = np.arange(max_state + 1)[None, :]
    lf = LOG_FACTORIAL.upto(max_state)
    diff = x - y
    above = diff > 0
    safe_diff = np.where(above, diff, 0)
    log_q = np.log(q)
    log_1mq = np.log1p(-q)
    out = np.full((q.shape[0], max_state + 1), -np.inf)
    thinned = (math.log(omega) + lf[x] - lf[y] - lf[safe_diff]
               + y * log_q + safe_diff * log_1mq)
    equal = np.logaddexp(math.log1p(-omega), math.log(omega) + x * log_q)
    out = np.where(above, thinned, out)
    out = np.where(diff == 0, equal, out)
    return out
