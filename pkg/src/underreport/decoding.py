"""Viterbi reconstruction of the latent counts and coverage summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import CountSeries, LatentPath, ModelParams, UndefinedRate, ValidationError
from .likelihood import ModelArrays, _bound, _counts, initial_distribution
from .probability import log_emission_pmf, log_transition_pmf, q_values
from .sir import GrowthCurve, innovation_means


def viterbi(series, params: ModelParams, trunc, initial: str = "poisson") -> LatentPath:
    """Most likely latent path with every state in [y_i, trunc].

    Ties are resolved toward the smaller state both at the final step and
    during backtracking.
    """
    counts = _counts(series)
    max_state = _bound(trunc, counts)
    a = ModelArrays.build(counts, params, max_state, initial)
    path, best = _kernels.viterbi_path(a.counts, params.alpha, params.omega,
                                       a.lam, a.q, a.initial, a.log_factorial)
    if not math.isfinite(best):
        raise ValidationError("no feasible latent path under this truncation")
    return LatentPath(path, truncation=max_state)


def path_log_probability(states, series, params: ModelParams, trunc,
                         initial: str = "poisson") -> float:
    """Joint log P(X_{1:n} = states, Y_{1:n} = y) from the scalar pmfs.

    Independent of the compiled recursion; used to score candidate paths.
    """
    counts = _counts(series)
    states = np.asarray(getattr(states, "states", states))
    max_state = int(getattr(trunc, "max_state", trunc))
    if len(states) != len(counts):
        raise ValidationError("path and series lengths differ")
    if states.max() > max_state:
        return -math.inf
    lam = innovation_means(GrowthCurve.from_params(params), len(counts))
    q = q_values(params, np.arange(1, len(counts) + 1))
    init = initial_distribution(params, max_state, initial)
    with np.errstate(divide="ignore"):
        total = math.log(init[states[0]]) if init[states[0]] > 0 else -math.inf
    for t, (x, y) in enumerate(zip(states, counts)):
        if t > 0:
            total += log_transition_pmf(params.alpha, lam[t], int(states[t - 1]), int(x))
        total += float(log_emission_pmf(params.omega, q[t], int(x), int(y)))
    return total


@dataclass(frozen=True)
class CoverageReport:
    observed_total: int
    reconstructed_total: int
    coverage: float
    deaths: int | None = None
    lethality_observed: float | None = None
    lethality_reconstructed: float | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def coverage_from_totals(observed_total: int, reconstructed_total: int,
                         deaths: int | None = None) -> CoverageReport:
    """Percent of true cases registered, and lethality on both denominators."""
    if reconstructed_total <= 0:
        raise UndefinedRate("reconstructed total is zero; coverage undefined")
    coverage = 100.0 * observed_total / reconstructed_total
    if deaths is None:
        return CoverageReport(observed_total, reconstructed_total, coverage)
    if deaths < 0:
        raise ValidationError("deaths must be nonnegative")
    if observed_total <= 0:
        raise UndefinedRate("observed total is zero; lethality undefined")
    return CoverageReport(observed_total, reconstructed_total, coverage, deaths,
                          100.0 * deaths / observed_total,
                          100.0 * deaths / reconstructed_total)


def coverage_summary(series: CountSeries, path: LatentPath,
                     deaths: int | None = None) -> CoverageReport:
    path.check_feasible(series)
    return coverage_from_totals(series.total, path.total, deaths)
