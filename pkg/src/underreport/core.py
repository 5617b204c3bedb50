"""Domain types, parameter transforms and validation."""

from __future__ import annotations

import dataclasses
import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

PARAM_NAMES = ("alpha", "m_star", "k", "omega",
               "gamma0", "gamma1", "gamma2", "gamma3", "a0")
DEFAULT_FIXED = frozenset({"a0"})


class ModelError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(ModelError, ValueError):
    pass


class NoRootError(ModelError):
    pass


class NonConvergence(ModelError):
    """Optimizer failure; ``result`` holds the best point found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularHessian(ModelError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class UndefinedRate(ModelError):
    pass


def _readonly(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CountSeries:
    dates: tuple
    counts: np.ndarray
    label: str = ""

    def __post_init__(self):
        dates = tuple(self.dates)
        raw = list(self.counts)
        if len(raw) != len(dates):
            raise ValidationError(
                f"{len(raw)} counts but {len(dates)} dates")
        if len(raw) < 2:
            raise ValidationError("a series needs at least two days")
        for c in raw:
            if isinstance(c, float) and not float(c).is_integer():
                raise ValidationError(f"non-integer count {c}")
        counts = _readonly(raw, np.int64)
        if (counts < 0).any():
            bad = int(np.argmax(counts < 0))
            raise ValidationError(
                f"negative count {counts[bad]} on {dates[bad].isoformat()}")
        one = dt.timedelta(days=1)
        for prev, cur in zip(dates, dates[1:]):
            if cur - prev != one:
                raise ValidationError(
                    f"dates not contiguous: {prev.isoformat()} followed by "
                    f"{cur.isoformat()}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_counts(cls, counts, start: dt.date = dt.date(2020, 1, 1),
                    label: str = "") -> "CountSeries":
        dates = tuple(start + dt.timedelta(days=i) for i in range(len(counts)))
        return cls(dates, counts, label)

    def __len__(self):
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def head(self, n: int) -> "CountSeries":
        return CountSeries(self.dates[:n], self.counts[:n], self.label)


@dataclass(frozen=True)
class ModelParams:
    """Natural-scale parameter vector.

    ``alpha`` is the thinning survival probability of the latent INAR(1)
    process, ``m_star``/``k``/``a0`` define the logistic affected curve whose
    daily increments are the innovation means, ``omega`` is the probability
    that a day is under-reported and ``gamma0..gamma3`` are the logit
    coefficients of the reporting intensity ``q_n``.
    """

    alpha: float
    m_star: float
    k: float
    omega: float
    gamma0: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    a0: float = 1.0

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"{name} is not finite: {value}")
            object.__setattr__(self, name, float(value))
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.omega < 1.0:
            raise ValidationError(f"omega must lie in (0, 1), got {self.omega}")
        if self.m_star <= 0.0:
            raise ValidationError(f"m_star must be positive, got {self.m_star}")
        if self.k <= 0.0:
            raise ValidationError(f"k must be positive, got {self.k}")
        if self.a0 < 1.0:
            raise ValidationError(f"a0 must be >= 1, got {self.a0}")
        if self.a0 >= self.m_star:
            raise ValidationError(
                f"a0 ({self.a0}) must be below m_star ({self.m_star})")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, values: Mapping[str, float]) -> "ModelParams":
        unknown = set(values) - set(PARAM_NAMES)
        if unknown:
            raise ValidationError(f"unknown parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in values.items()})

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    @property
    def gammas(self) -> tuple:
        return (self.gamma0, self.gamma1, self.gamma2, self.gamma3)


@dataclass(frozen=True)
class LatentPath:
    states: np.ndarray
    truncation: int | None = None

    def __post_init__(self):
        states = _readonly(list(self.states), np.int64)
        if states.size == 0:
            raise ValidationError("empty latent path")
        if (states < 0).any():
            raise ValidationError("latent states must be nonnegative")
        if self.truncation is not None and states.max() > self.truncation:
            raise ValidationError("latent state above truncation bound")
        object.__setattr__(self, "states", states)

    def __len__(self):
        return len(self.states)

    @property
    def total(self) -> int:
        return int(self.states.sum())

    def check_feasible(self, series: CountSeries) -> None:
        if len(self) != len(series):
            raise ValidationError("path and series lengths differ")
        if (self.states < series.counts).any():
            raise ValidationError("latent state below an observed count")


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    log_likelihood: float
    converged: bool
    truncation: int
    fixed: frozenset = DEFAULT_FIXED
    std_errors: dict | None = None
    covariance: np.ndarray | None = None
    initial: str = "poisson"
    message: str = ""
    n_evaluations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        if not math.isfinite(self.log_likelihood):
            raise ValidationError("fit log-likelihood is not finite")
        if self.covariance is not None:
            cov = _readonly(self.covariance, float)
            object.__setattr__(self, "covariance", cov)

    @property
    def free_names(self) -> tuple:
        return free_names(self.fixed)


@dataclass(frozen=True)
class SirParams:
    beta: float
    gamma_rate: float
    n_pop: float
    a_inf: float
    a_star: float
    a0: float
    r0: float = 0.0

    @property
    def reproduction_number(self) -> float:
        return self.beta / self.gamma_rate


def free_names(fixed: Iterable[str] = DEFAULT_FIXED) -> tuple:
    fixed = set(fixed)
    unknown = fixed - set(PARAM_NAMES)
    if unknown:
        raise ValidationError(f"unknown parameters: {sorted(unknown)}")
    return tuple(n for n in PARAM_NAMES if n not in fixed)


def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


_FORWARD = {
    "alpha": _logit, "omega": _logit,
    "m_star": math.log, "k": math.log,
    "a0": lambda v: math.log(v - 1.0),
}
_INVERSE = {
    "alpha": _expit, "omega": _expit,
    "m_star": math.exp, "k": math.exp,
    "a0": lambda u: 1.0 + math.exp(u),
}


def to_unconstrained(params: ModelParams,
                     fixed: Iterable[str] = DEFAULT_FIXED) -> np.ndarray:
    """Map the free parameters to R^d (logit, log or identity per slot)."""
    out = []
    for name in free_names(fixed):
        value = getattr(params, name)
        out.append(_FORWARD.get(name, float)(value))
    return np.array(out, dtype=float)


def from_unconstrained(vector: Sequence[float], template: ModelParams,
                       fixed: Iterable[str] = DEFAULT_FIXED) -> ModelParams:
    names = free_names(fixed)
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (len(names),):
        raise ValidationError(
            f"expected {len(names)} free values, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise ValidationError("unconstrained vector has non-finite entries")
    values = template.as_dict()
    for name, u in zip(names, vector):
        values[name] = _INVERSE.get(name, float)(float(u))
    return ModelParams(**values)


def params_vector(params: ModelParams, names: Sequence[str]) -> np.ndarray:
    return np.array([getattr(params, n) for n in names], dtype=float)


def with_values(params: ModelParams, names: Sequence[str], values) -> ModelParams:
    return params.replace(**{n: float(v) for n, v in zip(names, values)})
