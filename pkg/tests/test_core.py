import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _reference import CANTABRIA
from underreport import CountSeries, FitResult, LatentPath, ModelParams, ValidationError
from underreport.core import (_INVERSE, DEFAULT_FIXED, free_names, from_unconstrained,
                              params_vector, to_unconstrained)

ALL_FREE = frozenset()


def test_unconstrained_slots():
    p = ModelParams(alpha=0.5, m_star=1.0 + 1e-9, k=2.0, omega=0.3, gamma2=-1.5)
    u = dict(zip(free_names(DEFAULT_FIXED), to_unconstrained(p)))
    assert u["alpha"] == pytest.approx(0.0)
    assert u["m_star"] == pytest.approx(0.0, abs=1e-8)
    assert u["k"] == pytest.approx(math.log(2.0))
    assert u["gamma2"] == -1.5
    assert "a0" not in u


def test_zero_vector_maps_to_centre():
    assert {name: inv(0.0) for name, inv in _INVERSE.items()} == dict(
        alpha=0.5, omega=0.5, m_star=1.0, k=1.0, a0=2.0)
    # m_star = 1 would collide with a0 >= 1, so give that slot room
    template = ModelParams(alpha=0.2, m_star=5.0, k=0.2, omega=0.2, a0=1.0)
    u = np.zeros(8)
    u[1] = math.log(3.0)
    p = from_unconstrained(u, template, DEFAULT_FIXED)
    assert (p.alpha, p.omega, p.k, p.a0) == (0.5, 0.5, 1.0, 1.0)
    assert p.m_star == pytest.approx(3.0)
    assert p.gammas == (0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        from_unconstrained(np.zeros(8), template, DEFAULT_FIXED)


def test_reference_vector_round_trips():
    back = from_unconstrained(to_unconstrained(CANTABRIA), CANTABRIA)
    for name, value in CANTABRIA.as_dict().items():
        assert getattr(back, name) == pytest.approx(value, rel=1e-12)


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_nonfinite_vector_rejected(bad):
    u = to_unconstrained(CANTABRIA)
    u[2] = bad
    with pytest.raises(ValidationError):
        from_unconstrained(u, CANTABRIA)


def test_wrong_length_rejected():
    with pytest.raises(ValidationError):
        from_unconstrained(np.zeros(3), CANTABRIA)


valid_params = st.builds(
    ModelParams,
    alpha=st.floats(1e-4, 1 - 1e-4), m_star=st.floats(2.0, 1e5), k=st.floats(1e-3, 3.0),
    omega=st.floats(1e-4, 1 - 1e-4), gamma0=st.floats(-5, 5), gamma1=st.floats(-1, 1),
    gamma2=st.floats(-5, 5), gamma3=st.floats(-5, 5), a0=st.floats(1.0 + 1e-3, 1.9))


@settings(max_examples=1000, deadline=None)
@given(valid_params)
def test_round_trip_property(p):
    back = from_unconstrained(to_unconstrained(p, ALL_FREE), p, ALL_FREE)
    for name, value in p.as_dict().items():
        assert getattr(back, name) == pytest.approx(value, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("change", [
    dict(alpha=0.0), dict(alpha=1.0), dict(omega=0.0), dict(omega=1.0),
    dict(m_star=0.0), dict(k=-0.1), dict(a0=0.5), dict(a0=300.0), dict(gamma1=math.nan),
])
def test_invalid_params_rejected(change):
    with pytest.raises(ValidationError):
        CANTABRIA.replace(**change)


def test_params_from_dict_rejects_unknown():
    with pytest.raises(ValidationError, match="unknown"):
        ModelParams.from_dict({**CANTABRIA.as_dict(), "delta": 1.0})


def test_count_series_validation():
    day = dt.date(2020, 3, 1)
    with pytest.raises(ValidationError, match="negative"):
        CountSeries.from_counts([1, -1, 2], start=day)
    with pytest.raises(ValidationError, match="non-integer"):
        CountSeries.from_counts([1, 2.5], start=day)
    with pytest.raises(ValidationError, match="contiguous"):
        CountSeries((day, day + dt.timedelta(days=2)), [1, 2])
    with pytest.raises(ValidationError, match="two days"):
        CountSeries.from_counts([3])
    s = CountSeries.from_counts([1, 2, 3], start=day)
    assert s.total == 6 and len(s.head(2)) == 2
    with pytest.raises(ValueError):
        s.counts[0] = 5


def test_latent_path_feasibility():
    series = CountSeries.from_counts([1, 2, 3])
    LatentPath([1, 2, 3]).check_feasible(series)
    with pytest.raises(ValidationError):
        LatentPath([1, 1, 3]).check_feasible(series)
    with pytest.raises(ValidationError):
        LatentPath([1, 9], truncation=5)


def test_fit_result_invariants():
    cov = np.diag([0.01, 4.0])
    res = FitResult(params=CANTABRIA, log_likelihood=-1.0, converged=True, truncation=10,
                    fixed=set(free_names()) - {"alpha", "k"} | {"a0"},
                    std_errors={"alpha": 0.1, "k": 2.0}, covariance=cov)
    assert res.free_names == ("alpha", "k")
    assert np.allclose(np.diag(res.covariance), [v ** 2 for v in res.std_errors.values()])
    assert params_vector(res.params, res.free_names)[0] == CANTABRIA.alpha
    with pytest.raises(ValidationError):
        FitResult(params=CANTABRIA, log_likelihood=-math.inf, converged=True, truncation=1)
