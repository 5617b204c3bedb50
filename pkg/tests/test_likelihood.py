import math

import numpy as np
import pytest
from scipy import stats

import _oracle
from _reference import CANTABRIA
from underreport import (ModelParams, TruncationBound, ValidationError, forward,
                         initial_distribution, log_likelihood, simulate_series)
from underreport.probability import log_emission_pmf, q_values

SMALL = ModelParams(alpha=0.4, m_star=12.0, k=0.6, omega=0.35,
                    gamma0=0.2, gamma1=-0.1, gamma2=0.5, gamma3=-0.3)


def test_three_day_enumeration():
    oracle = _oracle.brute_loglik(SMALL, [1, 0, 2], 4)
    assert log_likelihood([1, 0, 2], SMALL, 4) == pytest.approx(oracle, abs=1e-10)


def test_single_day_reduction():
    init = initial_distribution(SMALL, 6)
    q1 = float(q_values(SMALL, 1))
    expected = math.log(sum(init[x] * math.exp(log_emission_pmf(SMALL.omega, q1, x, 0))
                            for x in range(7)))
    assert log_likelihood([0], SMALL, 6) == pytest.approx(expected, abs=1e-12)


def test_truncation_invariance():
    _, series = simulate_series(SMALL.replace(m_star=60.0), 30, seed=3)
    top = int(series.counts.max())
    values = [log_likelihood(series, SMALL.replace(m_star=60.0), top * f + 20)
              for f in (4, 6, 8)]
    assert values[1] == pytest.approx(values[0], abs=1e-9)
    assert values[2] == pytest.approx(values[1], abs=1e-9)


def test_truncation_below_max_count_rejected():
    with pytest.raises(ValidationError):
        log_likelihood([1, 5, 2], SMALL, 4)
    with pytest.raises(ValidationError):
        TruncationBound(0)


def test_long_series_no_underflow():
    _, series = simulate_series(CANTABRIA, 200, seed=11)
    value = log_likelihood(series, CANTABRIA, int(1.5 * series.counts.max()))
    assert math.isfinite(value) and value < 0


def test_forward_lattice_consistency():
    counts = [2, 1, 3, 0]
    lattice = forward(counts, SMALL, 6)
    assert lattice.log_likelihood == pytest.approx(log_likelihood(counts, SMALL, 6), abs=1e-12)
    assert np.allclose(lattice.filtered.sum(axis=1), 1.0)
    # gamma_n(x) is zero below the observed count
    assert np.all(np.isneginf(lattice.log_probs[0, :2]))
    oracle = _oracle.PathOracle(SMALL, 4, 6, 3)
    assert lattice.log_likelihood == pytest.approx(oracle.loglik(counts), abs=1e-10)


def test_uniform_initial_option():
    counts = [1, 0, 2]
    value = log_likelihood(counts, SMALL, 4, initial="uniform")
    assert math.isfinite(value)
    assert value != pytest.approx(log_likelihood(counts, SMALL, 4))
    with pytest.raises(ValidationError):
        initial_distribution(SMALL, 4, "geometric")


def test_initial_without_autoregression_is_poisson():
    # lambda_1 = a0 (e^k - 1) = 1 when k = log 2, in the exponential regime
    p = ModelParams(alpha=1e-12, m_star=1e12, k=math.log(2.0), omega=0.5)
    init = initial_distribution(p, 30)
    expected = stats.poisson.pmf(np.arange(31), 1.0)
    assert np.allclose(init, expected / expected.sum(), atol=1e-10)


def test_initial_moments():
    init = initial_distribution(CANTABRIA, 400)
    lam1 = (CANTABRIA.m_star - 1) * (math.exp(CANTABRIA.k) - 1) / (
        CANTABRIA.m_star + math.exp(CANTABRIA.k) - 1)
    assert init.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.arange(401) @ init == pytest.approx(lam1 / (1 - CANTABRIA.alpha), rel=1e-9)


def test_deterministic():
    _, series = simulate_series(CANTABRIA, 60, seed=5)
    trunc = int(1.5 * series.counts.max())
    assert log_likelihood(series, CANTABRIA, trunc) == log_likelihood(series, CANTABRIA, trunc)
