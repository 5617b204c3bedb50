import numpy as np
import pytest

import _oracle
from _reference import CANTABRIA, TOTALS
from underreport import (CountSeries, LatentPath, UndefinedRate, ValidationError,
                         coverage_from_totals, coverage_summary, simulate_series, viterbi)
from underreport.decoding import path_log_probability
from underreport.probability import truncation_bound


def test_no_under_reporting_returns_series():
    p = CANTABRIA.replace(omega=1e-9)
    _, series = simulate_series(p, 50, seed=4)
    path = viterbi(series, p, truncation_bound(series.counts))
    assert np.array_equal(path.states, series.counts)


def test_small_cases_match_enumeration(rng):
    p = CANTABRIA.replace(alpha=0.5, m_star=15.0, k=0.7)
    for _ in range(30):
        counts = list(rng.integers(0, 4, rng.integers(2, 5)))
        expected, _, _ = _oracle.PathOracle(p, len(counts), 5, 3).viterbi(counts)
        assert np.array_equal(viterbi(counts, p, 5).states, expected)


def test_path_dominates_random_feasible_paths(rng):
    _, series = simulate_series(CANTABRIA, 40, seed=12)
    trunc = truncation_bound(series.counts)
    path = viterbi(series, CANTABRIA, trunc)
    best = path_log_probability(path, series, CANTABRIA, trunc)
    y = series.counts
    for _ in range(1000):
        candidate = y + rng.integers(0, trunc - y + 1)
        if rng.random() < 0.5:
            candidate = np.clip(path.states + rng.integers(-2, 3, len(y)), y, trunc)
        assert path_log_probability(candidate, series, CANTABRIA, trunc) <= best + 1e-9


def test_path_is_feasible_and_bounded():
    _, series = simulate_series(CANTABRIA, 60, seed=13)
    trunc = truncation_bound(series.counts)
    path = viterbi(series, CANTABRIA, trunc)
    path.check_feasible(series)
    assert path.states.max() <= trunc == path.truncation


def test_cantabria_reconstruction(cantabria):
    path = viterbi(cantabria, CANTABRIA, truncation_bound(cantabria.counts))
    assert path.total == pytest.approx(6074, rel=0.10)


@pytest.mark.parametrize("region", sorted(TOTALS))
def test_reference_arithmetic(region):
    obs, rec, deaths, cov, leth_obs, leth_rec = TOTALS[region]
    report = coverage_from_totals(obs, rec, deaths)
    if region != "baleares":  # reference coverage disagrees with its own totals
        assert report.coverage == pytest.approx(cov, abs=0.05)
    assert report.lethality_observed == pytest.approx(leth_obs, abs=0.05)
    assert report.lethality_reconstructed == pytest.approx(leth_rec, abs=0.05)


def test_identity_reconstruction():
    series = CountSeries.from_counts([3, 5, 0, 2])
    report = coverage_summary(series, LatentPath(series.counts), deaths=1)
    assert report.coverage == 100.0
    assert report.lethality_observed == report.lethality_reconstructed
    assert report.as_dict()["reconstructed_total"] == 10


def test_undefined_rates():
    with pytest.raises(UndefinedRate):
        coverage_from_totals(0, 0)
    with pytest.raises(UndefinedRate):
        coverage_from_totals(0, 5, deaths=1)
    with pytest.raises(ValidationError):
        coverage_from_totals(3, 5, deaths=-1)
    with pytest.raises(ValidationError):
        coverage_summary(CountSeries.from_counts([3, 5]), LatentPath([1, 9]))


def test_path_beats_observed_series_and_is_deterministic():
    _, series = simulate_series(CANTABRIA, 50, seed=14)
    trunc = truncation_bound(series.counts)
    path = viterbi(series, CANTABRIA, trunc)
    assert path_log_probability(path, series, CANTABRIA, trunc) >= path_log_probability(
        series.counts, series, CANTABRIA, trunc)
    assert np.array_equal(path.states, viterbi(series, CANTABRIA, trunc).states)
