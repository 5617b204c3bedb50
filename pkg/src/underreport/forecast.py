"""Point forecasts, k-ahead forecast distributions and forecasting drivers."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (CountSeries, FitResult, LatentPath, ModelError, ModelParams,
                   SingularHessian, ValidationError, params_vector, with_values)
from .decoding import viterbi
from .estimation import FitOptions, fit
from .probability import log_binom_pmf, log_poisson_pmf, q_values
from .sir import GrowthCurve, innovation_means

log = logging.getLogger(__name__)

TAIL_MASS = 1e-12


def accumulated_innovation(params: ModelParams, n: int, k: int) -> float:
    """sum_{i=1..k} alpha^{k-i} lambda_{n+i}."""
    lam = innovation_means(GrowthCurve.from_params(params), k, start=n + 1)
    weights = params.alpha ** np.arange(k - 1, -1, -1)
    return float(weights @ lam)


def _report_rate(params: ModelParams, day: int) -> float:
    return 1.0 - params.omega * (1.0 - float(q_values(params, day)))


def point_forecast(y_n: float, params: ModelParams, n: int, k: int) -> float:
    """Average prediction of Y_{n+k} from the last reported count."""
    if k < 1:
        raise ValidationError("forecast horizon must be >= 1")
    rate_now = _report_rate(params, n)
    rate_ahead = _report_rate(params, n + k)
    phi = rate_ahead / rate_now
    return (phi * params.alpha ** k * y_n
            + phi * rate_now * accumulated_innovation(params, n, k))


def latent_expectation(ex_n: float, params: ModelParams, n: int, k: int) -> float:
    """E(X_{n+k}) = alpha^k E(X_n) + sum alpha^{k-i} lambda_{n+i}."""
    return params.alpha ** k * ex_n + accumulated_innovation(params, n, k)


def mixture_mean(x_n: float, params: ModelParams, n: int, k: int) -> float:
    """Closed-form mean of Y_{n+k} given X_n = x_n (x_n may be fractional)."""
    base = params.alpha ** k * x_n + accumulated_innovation(params, n, k)
    q = float(q_values(params, n + k))
    return (1.0 - params.omega) * base + params.omega * q * base


def point_forecast_se(y_n: float, fit: FitResult, n: int, k: int,
                      rel_step: float = 1e-6) -> float:
    """Delta-method standard error over every free parameter of the fit."""
    if fit.covariance is None:
        raise SingularHessian("fit has no covariance matrix")
    names = fit.free_names
    cov = np.asarray(fit.covariance)
    if cov.size == 0:
        return 0.0
    theta = params_vector(fit.params, names)
    steps = rel_step * np.maximum(np.abs(theta), 1e-2)

    def f(values):
        return point_forecast(y_n, with_values(fit.params, names, values), n, k)

    grad = np.empty(theta.size)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = steps[i]
        grad[i] = (f(theta + e) - f(theta - e)) / (2.0 * steps[i])
    var = float(grad @ cov @ grad)
    return math.sqrt(max(var, 0.0))


def _poisson_support(mu: float, tail: float = TAIL_MASS) -> int:
    """Smallest m with P(Poisson(mu) > m) < tail, via the Chernoff bound."""
    if mu == 0.0:
        return 0
    m = max(int(math.ceil(mu)), 1)
    # P(W >= m) <= exp(-mu) (e mu / m)^m for m > mu
    while m * (1.0 + math.log(mu / m)) - mu >= math.log(tail) or m <= mu:
        m += max(1, int(math.sqrt(mu)))
    return m


def _component_pmf(x_n: int, p: float, mu: float, size: int) -> np.ndarray:
    binom = np.exp(log_binom_pmf(np.arange(x_n + 1), x_n, p))
    pois = np.exp(log_poisson_pmf(np.arange(size), mu))
    return np.convolve(binom, pois)[:size]


@dataclass(frozen=True)
class ForecastDistribution:
    horizon: int
    pmf: np.ndarray
    alpha_star: float
    r1: int
    r2: int
    mean: float
    median: int

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    @property
    def support_max(self) -> int:
        return len(self.pmf) - 1


def quantile_limits(pmf, alpha_star: float) -> tuple:
    """(r1, median, r2).

    r1 is the largest j with P(Y <= j) <= alpha*/2 (0 when even P(Y = 0)
    exceeds that level), r2 the smallest j with P(Y <= j) >= 1 - alpha*/2.
    """
    cdf = np.cumsum(pmf)
    below = np.flatnonzero(cdf <= alpha_star / 2.0)
    r1 = int(below[-1]) if below.size else 0
    median = int(np.searchsorted(cdf, 0.5))
    r2 = int(np.searchsorted(cdf, 1.0 - alpha_star / 2.0))
    last = len(pmf) - 1
    return r1, min(median, last), min(r2, last)


def forecast_distribution(x_n: int, params: ModelParams, n: int, k: int,
                          alpha_star: float = 0.05) -> ForecastDistribution:
    """Exact law of Y_{n+k} given X_n = x_n.

    Mixture, with weights (1 - omega, omega), of Binomial(x_n, alpha^k) +
    Poisson(L) and Binomial(x_n, q alpha^k) + Poisson(q L), where
    L = sum alpha^{k-i} lambda_{n+i} and q = q_{n+k}.  The support is
    cut where the omitted tail mass is below 1e-12.
    """
    if x_n < 0 or int(x_n) != x_n:
        raise ValidationError("x_n must be a nonnegative integer")
    if k < 1:
        raise ValidationError("forecast horizon must be >= 1")
    if not 0.0 < alpha_star < 1.0:
        raise ValidationError("alpha_star must lie in (0, 1)")
    x_n = int(x_n)
    decay = params.alpha ** k
    big_l = accumulated_innovation(params, n, k)
    q = float(q_values(params, n + k))
    size = x_n + _poisson_support(big_l) + 1
    pmf = ((1.0 - params.omega) * _component_pmf(x_n, decay, big_l, size)
           + params.omega * _component_pmf(x_n, q * decay, q * big_l, size))
    r1, median, r2 = quantile_limits(pmf, alpha_star)
    mean = float(np.arange(size) @ pmf)
    return ForecastDistribution(horizon=k, pmf=pmf, alpha_star=alpha_star,
                                r1=r1, r2=r2, mean=mean, median=median)


@dataclass(frozen=True)
class ForecastRecord:
    day: dt.date
    horizon: int
    point: float | None = None
    se: float | None = None
    mean: float | None = None
    median: int | None = None
    lower: int | None = None
    upper: int | None = None
    observed: int | None = None
    error: str | None = None

    @property
    def covered(self) -> bool | None:
        if self.observed is None or self.lower is None:
            return None
        return self.lower <= self.observed <= self.upper

    def as_row(self) -> dict:
        return {"day": self.day.isoformat(), "point": self.point, "se": self.se,
                "mean": self.mean, "median": self.median,
                "p2.5": self.lower, "p97.5": self.upper}


def _record(day, k, y_n, fit_result, x_n, n, alpha_star, observed=None):
    params = fit_result.params
    dist = forecast_distribution(x_n, params, n, k, alpha_star)
    point = point_forecast(y_n, params, n, k)
    try:
        se = point_forecast_se(y_n, fit_result, n, k)
    except SingularHessian:
        se = None
    return ForecastRecord(day=day, horizon=k, point=point, se=se, mean=dist.mean,
                          median=dist.median, lower=dist.r1, upper=dist.r2,
                          observed=observed), dist


def static_forecast(series: CountSeries, fit_result: FitResult, path: LatentPath,
                    horizon: int, alpha_star: float = 0.05) -> list:
    """Forecast days n+1..n+horizon from one fit, conditioning on the last latent state."""
    path.check_feasible(series)
    n = len(series)
    x_n = int(path.states[-1])
    y_n = int(series.counts[-1])
    last = series.dates[-1]
    return [_record(last + dt.timedelta(days=k), k, y_n, fit_result, x_n, n,
                    alpha_star)[0] for k in range(1, horizon + 1)]


@dataclass(frozen=True)
class DynamicForecast:
    records: list
    fits: list = field(default_factory=list, repr=False)

    @property
    def coverage(self) -> float:
        flags = [r.covered for r in self.records if r.covered is not None]
        return float(np.mean(flags)) if flags else float("nan")


def dynamic_forecast(series: CountSeries, holdout: int,
                     options: FitOptions | None = None, init: ModelParams | None = None,
                     fixed=None, alpha_star: float = 0.05,
                     warm_start: bool = True) -> DynamicForecast:
    """Expanding-window one-step-ahead evaluation over the last ``holdout`` days.

    After the first window, each refit starts from the previous estimate
    with a single start when ``warm_start`` is set.
    """
    from .core import DEFAULT_FIXED
    n_total = len(series)
    if not 1 <= holdout < n_total - 10:
        raise ValidationError("holdout must satisfy 1 <= k < len(series) - 10")
    options = options or FitOptions()
    fixed = DEFAULT_FIXED if fixed is None else fixed
    records, fits = [], []
    previous = None
    for i in range(holdout):
        n = n_total - holdout + i
        train = series.head(n)
        day = series.dates[n]
        observed = int(series.counts[n])
        window_options = options
        start = init
        if warm_start and previous is not None:
            start = previous.params
            window_options = options.replace(restarts=1, simplex=False)
        try:
            result = fit(train, start, fixed, window_options)
            path = viterbi(train, result.params, result.truncation, result.initial)
            record, _ = _record(day, 1, int(train.counts[-1]), result,
                                int(path.states[-1]), n, alpha_star, observed)
            previous = result
        except (ModelError, ValueError) as exc:
            log.warning("window ending %s failed: %s", train.dates[-1], exc)
            record, result = ForecastRecord(day=day, horizon=1, observed=observed,
                                            error=str(exc)), None
        records.append(record)
        fits.append(result)
    return DynamicForecast(records=records, fits=fits)
