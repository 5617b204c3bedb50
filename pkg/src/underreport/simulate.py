"""Sampling from the generative model."""

from __future__ import annotations

import datetime as dt

import numpy as np

from .core import CountSeries, LatentPath, ModelParams, ValidationError
from .probability import q_values
from .sir import GrowthCurve, innovation_means


def day_rng(seed: int, day: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one (seed, day, stream) cell.

    Draws for a given day never depend on how many draws other days made.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, day, stream])))


def thin(x, p: float, rng: np.random.Generator):
    """Binomial thinning: each of ``x`` units survives with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"thinning probability {p} outside [0, 1]")
    return rng.binomial(x, p)


def _report(x, omega, q, rng):
    under = rng.random(np.shape(x)) < omega
    return np.where(under, rng.binomial(x, q), x)


def simulate_series(params: ModelParams, n_days: int, seed: int = 0,
                    start: dt.date = dt.date(2020, 1, 1),
                    label: str = "simulated") -> tuple:
    """Draw (latent path, reported series) for ``n_days`` days."""
    if n_days < 2:
        raise ValidationError("need at least two days")
    lam = innovation_means(GrowthCurve.from_params(params), n_days)
    q = q_values(params, np.arange(1, n_days + 1))
    latent = np.empty(n_days, dtype=np.int64)
    observed = np.empty(n_days, dtype=np.int64)
    x = 0
    for t in range(n_days):
        rng = day_rng(seed, t + 1)
        if t == 0:
            x = int(rng.poisson(lam[0] / (1.0 - params.alpha)))
        else:
            x = int(thin(x, params.alpha, rng) + rng.poisson(lam[t]))
        latent[t] = x
        observed[t] = int(_report(x, params.omega, q[t], rng))
    series = CountSeries.from_counts(observed, start=start, label=label)
    return LatentPath(latent), series


def simulate_ahead(params: ModelParams, x_n: int, n: int, k: int, size: int,
                   seed: int = 0) -> np.ndarray:
    """``size`` independent draws of Y_{n+k} given X_n = x_n."""
    lam = innovation_means(GrowthCurve.from_params(params), k, start=n + 1)
    x = np.full(size, x_n, dtype=np.int64)
    for i in range(k):
        rng = day_rng(seed, n + i + 1)
        x = rng.binomial(x, params.alpha) + rng.poisson(lam[i], size)
    q = float(q_values(params, n + k))
    return _report(x, params.omega, q, day_rng(seed, n + k, stream=1))
