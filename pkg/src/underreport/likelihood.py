"""Forward-algorithm likelihood of an observed count series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CountSeries, ModelParams, ValidationError
from .probability import LOG_FACTORIAL, log_poisson_pmf, q_values
from .sir import GrowthCurve, innovation_means

INITIAL_KINDS = ("poisson", "uniform")


@dataclass(frozen=True)
class TruncationBound:
    max_state: int

    def __post_init__(self):
        if int(self.max_state) != self.max_state or self.max_state < 1:
            raise ValidationError("truncation bound must be a positive integer")

    def check(self, counts) -> None:
        if np.max(counts) > self.max_state:
            raise ValidationError(
                f"truncation {self.max_state} below the largest count "
                f"{int(np.max(counts))}")


def _counts(series) -> np.ndarray:
    if isinstance(series, CountSeries):
        return series.counts
    return np.asarray(series, dtype=np.int64)


def _bound(trunc, counts) -> int:
    bound = trunc if isinstance(trunc, TruncationBound) else TruncationBound(int(trunc))
    bound.check(counts)
    return bound.max_state


def initial_distribution(params: ModelParams, trunc, kind: str = "poisson") -> np.ndarray:
    """Law of X_1 on 0..max_state.

    ``poisson`` uses the quasi-stationary INAR(1) marginal with mean
    lambda_1 / (1 - alpha); ``uniform`` is the sensitivity alternative.
    Both are renormalized to the truncated support.
    """
    size = int(getattr(trunc, "max_state", trunc)) + 1
    if kind == "uniform":
        return np.full(size, 1.0 / size)
    if kind != "poisson":
        raise ValidationError(f"unknown initial distribution {kind!r}")
    lam1 = innovation_means(GrowthCurve.from_params(params), 1)[0]
    log_p = log_poisson_pmf(np.arange(size), lam1 / (1.0 - params.alpha))
    p = np.exp(log_p - log_p.max())
    return p / p.sum()


@dataclass(frozen=True)
class ModelArrays:
    """Per-day quantities consumed by the compiled recursions."""

    counts: np.ndarray
    lam: np.ndarray
    q: np.ndarray
    initial: np.ndarray
    log_factorial: np.ndarray

    @classmethod
    def build(cls, counts, params: ModelParams, max_state: int,
              initial: str = "poisson") -> "ModelArrays":
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        n = len(counts)
        return cls(counts=counts,
                   lam=innovation_means(GrowthCurve.from_params(params), n),
                   q=q_values(params, np.arange(1, n + 1)),
                   initial=initial_distribution(params, max_state, initial),
                   log_factorial=LOG_FACTORIAL.upto(max_state))


@dataclass(frozen=True)
class ForwardLattice:
    """log_probs[k, x] = log gamma_k(y_{1:k}, x); scaling holds per-step log normalizers."""

    log_probs: np.ndarray
    scaling: np.ndarray

    @property
    def log_likelihood(self) -> float:
        return float(self.scaling.sum())

    @property
    def filtered(self) -> np.ndarray:
        return np.exp(self.log_probs - np.cumsum(self.scaling)[:, None])

    @property
    def tail_mass(self) -> float:
        """Largest filtered probability sitting on the top state."""
        return float(self.filtered[:, -1].max())


def forward(series, params: ModelParams, trunc,
            initial: str = "poisson") -> ForwardLattice:
    counts = _counts(series)
    max_state = _bound(trunc, counts)
    a = ModelArrays.build(counts, params, max_state, initial)
    filtered = np.zeros((len(counts), max_state + 1))
    _, scaling = _kernels.forward_scaled(a.counts, params.alpha, params.omega,
                                         a.lam, a.q, a.initial, a.log_factorial,
                                         filtered, True)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_probs = np.log(filtered) + np.cumsum(scaling)[:, None]
    return ForwardLattice(log_probs=log_probs, scaling=scaling)


def log_likelihood(series, params: ModelParams, trunc,
                   initial: str = "poisson") -> float:
    """log P(Y_1 = y_1, ..., Y_n = y_n) with latent states capped at ``trunc``.

    Returns -inf when no latent path within the truncation is compatible
    with the data.
    """
    counts = _counts(series)
    max_state = _bound(trunc, counts)
    a = ModelArrays.build(counts, params, max_state, initial)
    total, _ = _kernels.forward_scaled(a.counts, params.alpha, params.omega,
                                       a.lam, a.q, a.initial, a.log_factorial,
                                       np.zeros((1, 1)), False)
    return float(total)
