import dataclasses
import datetime as dt

import numpy as np
import pytest
from scipy import stats

from _reference import CANTABRIA, CANTABRIA_SE
from underreport import (FitOptions, FitResult, LatentPath, SingularHessian, ValidationError,
                         dynamic_forecast, forecast_distribution, point_forecast,
                         point_forecast_se, simulate_ahead, simulate_series, static_forecast,
                         viterbi)
from underreport.forecast import (accumulated_innovation, latent_expectation, mixture_mean,
                                  quantile_limits)
from underreport.sir import GrowthCurve, innovation_means

CONSTANT_Q = CANTABRIA.replace(gamma1=0.0, gamma2=0.0, gamma3=0.0)


def _fit_with(cov_names, variances, params=CANTABRIA):
    fixed = set(CANTABRIA.as_dict()) - set(cov_names)
    return FitResult(params=params, log_likelihood=-1.0, converged=True, truncation=500,
                     fixed=fixed, std_errors={n: v ** 0.5 for n, v in zip(cov_names, variances)},
                     covariance=np.diag(variances))


def test_persistence_limit():
    p = CONSTANT_Q.replace(alpha=1 - 1e-13)
    # far past the plateau the innovations vanish
    assert point_forecast(17, p, 600, 1) == pytest.approx(17.0, abs=1e-9)


def test_full_reporting_reduction():
    p = CANTABRIA.replace(omega=1e-12)
    for k in (1, 3, 7):
        reduced = p.alpha ** k * 40 + accumulated_innovation(p, 30, k)
        assert point_forecast(40, p, 30, k) == pytest.approx(reduced, abs=1e-9)


def test_accumulated_innovation_direct():
    lam = innovation_means(GrowthCurve.from_params(CANTABRIA), 40)
    direct = sum(CANTABRIA.alpha ** (5 - i) * lam[30 + i - 1] for i in range(1, 6))
    assert accumulated_innovation(CANTABRIA, 30, 5) == pytest.approx(direct, rel=1e-12)


def test_expectation_recursion():
    lam = innovation_means(GrowthCurve.from_params(CANTABRIA), 60)
    ex = 25.0
    for step in range(1, 8):
        ex = CANTABRIA.alpha * ex + lam[30 + step - 1]
        assert latent_expectation(25.0, CANTABRIA, 30, step) == pytest.approx(ex, rel=1e-12)


def test_horizon_validated():
    with pytest.raises(ValidationError):
        point_forecast(3, CANTABRIA, 10, 0)
    with pytest.raises(ValidationError):
        forecast_distribution(3, CANTABRIA, 10, 1, alpha_star=1.5)
    with pytest.raises(ValidationError):
        forecast_distribution(-1, CANTABRIA, 10, 1)


def test_zero_covariance_gives_zero_se():
    fit = _fit_with(["alpha", "k"], [0.0, 0.0])
    assert point_forecast_se(40, fit, 30, 3) == 0.0


def test_missing_covariance_raises():
    fit = FitResult(params=CANTABRIA, log_likelihood=-1.0, converged=True, truncation=10)
    with pytest.raises(SingularHessian):
        point_forecast_se(40, fit, 30, 3)


def test_one_dimensional_delta_method():
    sd = 0.0141
    fit = _fit_with(["k"], [sd ** 2])

    def at(k):
        return point_forecast(40, CANTABRIA.replace(k=k), 30, 3)

    def central(h):
        return (at(CANTABRIA.k + h) - at(CANTABRIA.k - h)) / (2 * h)

    # Richardson-extrapolated derivative as the reference slope
    slope = (4 * central(5e-4) - central(1e-3)) / 3
    assert point_forecast_se(40, fit, 30, 3) == pytest.approx(abs(slope) * sd, rel=1e-6)


def test_se_grows_with_horizon():
    names = list(CANTABRIA_SE)
    fit = _fit_with(names, [CANTABRIA_SE[n] ** 2 for n in names], CONSTANT_Q)
    ses = [point_forecast_se(20, fit, 15, k) for k in range(1, 8)]
    assert np.all(np.diff(ses) > 0)


def test_empty_history_full_reporting_is_poisson():
    p = CANTABRIA.replace(omega=1e-15)
    dist = forecast_distribution(0, p, 30, 4)
    expected = stats.poisson.pmf(np.arange(dist.pmf.size), accumulated_innovation(p, 30, 4))
    assert np.allclose(dist.pmf, expected, atol=1e-12)


def test_mixture_mean_identity(rng):
    for _ in range(20):
        x_n, n, k = int(rng.integers(0, 200)), int(rng.integers(1, 60)), int(rng.integers(1, 8))
        dist = forecast_distribution(x_n, CANTABRIA, n, k)
        assert dist.pmf.sum() == pytest.approx(1.0, abs=1e-9)
        assert dist.mean == pytest.approx(mixture_mean(x_n, CANTABRIA, n, k), abs=1e-8)
        assert dist.r1 <= dist.median <= dist.r2 <= dist.support_max


def test_small_case_matches_simulation():
    p = CANTABRIA.replace(m_star=20.0, k=0.4)
    dist = forecast_distribution(3, p, 5, 2)
    draws = 10 ** 6
    sample = simulate_ahead(p, 3, 5, 2, draws, seed=77)
    freq = np.bincount(sample, minlength=dist.pmf.size)
    assert freq.size == dist.pmf.size or freq[dist.pmf.size:].sum() == 0
    freq = freq[:dist.pmf.size] / draws
    se = np.sqrt(dist.pmf * (1 - dist.pmf) / draws)
    assert np.all(np.abs(freq - dist.pmf) <= 3 * se + 1e-12)


def test_quantile_limits():
    pmf = np.array([0.01, 0.01, 0.3, 0.36, 0.3, 0.01, 0.01])
    assert quantile_limits(pmf, 0.05) == (1, 3, 4)
    # nothing sits below alpha*/2: lower limit is 0
    assert quantile_limits(np.array([0.5, 0.3, 0.2]), 0.05)[0] == 0


def test_static_forecast(cantabria, cantabria_fit, cantabria_path):
    records = static_forecast(cantabria, cantabria_fit, cantabria_path, 7)
    assert len(records) == 7
    assert [r.horizon for r in records] == list(range(1, 8))
    assert records[0].day == cantabria.dates[-1] + dt.timedelta(days=1)
    assert all(r.se is not None and r.se >= 0 for r in records)
    assert all(r.lower <= r.median <= r.upper for r in records)
    assert set(records[0].as_row()) == {"day", "point", "se", "mean", "median",
                                        "p2.5", "p97.5"}


def test_static_width_grows_while_rising(cantabria, cantabria_fit, cantabria_path):
    # the weekly reporting cycle makes widths oscillate, so drop it and
    # forecast from a day on the rising part of the curve
    flat = dataclasses.replace(cantabria_fit, params=cantabria_fit.params.replace(
        gamma1=0.0, gamma2=0.0, gamma3=0.0))
    origin = 15
    records = static_forecast(cantabria.head(origin), flat,
                              LatentPath(cantabria_path.states[:origin]), 7)
    widths = [r.upper - r.lower for r in records]
    assert all(b >= a for a, b in zip(widths, widths[1:])), widths


def test_single_day_dynamic_forecast():
    _, series = simulate_series(CANTABRIA, 40, seed=41)
    result = dynamic_forecast(series, 1, FitOptions(restarts=1))
    assert len(result.records) == len(result.fits) == 1
    record = result.records[0]
    assert record.day == series.dates[-1] and record.observed == series.counts[-1]
    assert record.covered is not None and result.coverage in (0.0, 1.0)


@pytest.mark.parametrize("holdout", [0, 30])
def test_dynamic_holdout_bounds(holdout):
    _, series = simulate_series(CANTABRIA, 40, seed=41)
    with pytest.raises(ValidationError):
        dynamic_forecast(series, holdout)


def test_static_horizon_one_matches_dynamic_window():
    _, series = simulate_series(CANTABRIA, 40, seed=41)
    result = dynamic_forecast(series, 1, FitOptions(restarts=1))
    window_fit = result.fits[0]
    train = series.head(len(series) - 1)
    path = viterbi(train, window_fit.params, window_fit.truncation)
    static = static_forecast(train, window_fit, path, 1)[0]
    dynamic = result.records[0]
    assert (static.day, static.point, static.lower, static.upper) == (
        dynamic.day, dynamic.point, dynamic.lower, dynamic.upper)
