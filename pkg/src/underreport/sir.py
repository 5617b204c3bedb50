"""Logistic affected curve, innovation means and SIR parameter recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (FitResult, LatentPath, ModelParams, NoRootError,
                   SirParams, ValidationError)


@dataclass(frozen=True)
class GrowthCurve:
    m_star: float
    k: float
    a0: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValidationError("growth rate k must be positive")
        if not 0 < self.a0 < self.m_star:
            raise ValidationError("need 0 < a0 < m_star")

    @classmethod
    def from_params(cls, params: ModelParams) -> "GrowthCurve":
        return cls(params.m_star, params.k, params.a0)


def affected(curve: GrowthCurve, t):
    """Logistic A(t) with A(0) = a0 and plateau m_star.

    Evaluated as ``M a0 / (M e^{-kt} + a0 (1 - e^{-kt}))`` so large ``t``
    cannot overflow.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValidationError("affected curve is defined for t >= 0")
    decay = np.exp(-curve.k * t)
    out = curve.m_star * curve.a0 / (curve.m_star * decay
                                     + curve.a0 * (1.0 - decay))
    return float(out) if out.ndim == 0 else out


def innovation_means(curve: GrowthCurve, n_days: int, start: int = 1) -> np.ndarray:
    """``A(n) - A(n-1)`` for n = start .. start + n_days - 1.

    The difference is formed analytically to avoid cancellation once the
    curve has saturated:
    A(n) - A(n-1) = M a0 (M - a0) e^{-kn} (e^k - 1) / (D(n) D(n-1))
    with D(t) = M e^{-kt} + a0 (1 - e^{-kt}).
    """
    m, k, a0 = curve.m_star, curve.k, curve.a0
    n = np.arange(start, start + n_days, dtype=float)
    if n.size and n[0] < 1:
        raise ValidationError("innovation index starts at 1")
    d_now = m * np.exp(-k * n) + a0 * -np.expm1(-k * n)
    d_prev = m * np.exp(-k * (n - 1)) + a0 * -np.expm1(-k * (n - 1))
    return m * a0 * (m - a0) * np.exp(-k * n) * np.expm1(k) / (d_now * d_prev)


def innovation_mean(curve: GrowthCurve, n: int) -> float:
    return float(innovation_means(curve, 1, start=n)[0])


def a_infinity(fit) -> float:
    """Limiting affected count on the latent scale, ``M*/(1 - alpha)``.

    Accepts a FitResult or a bare ModelParams.
    """
    params = fit.params if isinstance(fit, FitResult) else fit
    return params.m_star / (1.0 - params.alpha)


def a_star_from_path(path: LatentPath) -> float:
    """Cumulative reconstructed count up to the first day of largest increment."""
    states = np.asarray(path.states if isinstance(path, LatentPath) else path)
    if states.size == 0:
        raise ValidationError("empty path")
    peak = int(np.argmax(states))
    return float(states[: peak + 1].sum())


def _log_ratio(n_pop, a0, a):
    # log((N - a0) / (N - a)) without cancellation for N >> a
    return math.log1p((a - a0) / (n_pop - a))


def _n_equation(n_pop, a0, a_inf, a_star):
    return (a_inf * (_log_ratio(n_pop, a0, a_star) - 1.0)
            - (2.0 * a_star - n_pop) * _log_ratio(n_pop, a0, a_inf))


def _bisect(f, lo, hi, flo, rel_tol=1e-10, max_iter=400):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= rel_tol * lo:
            break
    return 0.5 * (lo + hi)


def _newton_polish(f, x, lo, hi, rel_tol=1e-12, steps=8):
    for _ in range(steps):
        h = 1e-7 * x
        fx = f(x)
        slope = (f(x + h) - f(x - h)) / (2.0 * h)
        if slope == 0.0 or not math.isfinite(slope):
            break
        nxt = x - fx / slope
        if not lo < nxt < hi or abs(f(nxt)) > abs(fx):
            break
        done = abs(nxt - x) <= rel_tol * x
        x = nxt
        if done:
            break
    return x


def solve_population(a0: float, a_inf: float, a_star: float,
                     max_factor: float = 1e6) -> float:
    """Root in N of the equation combining the plateau and inflection conditions.

    Scans geometrically upward from just above ``a_inf`` for the first sign
    change, bisects, then polishes with Newton steps.
    """
    f = lambda n_pop: _n_equation(n_pop, a0, a_inf, a_star)
    lo = a_inf * (1.0 + 1e-9)
    upper = a_inf * max_factor
    flo = f(lo)
    hi = a_inf * 1.01
    while lo < upper:
        hi = min(hi, upper)
        fhi = f(hi)
        if (fhi > 0) != (flo > 0) or fhi == 0.0:
            break
        lo, flo = hi, fhi
        hi *= 1.25
    else:
        raise NoRootError(
            f"population equation has no sign change on "
            f"({a_inf:.6g}, {upper:.6g}]")
    if fhi == 0.0:
        return hi
    root = _bisect(f, lo, hi, flo)
    return _newton_polish(f, root, lo, hi)


def recover_sir(a0: float, a_inf: float, a_star: float, k: float) -> SirParams:
    """Recover (beta, gamma, N) from the curve summaries and ``k = beta - gamma``."""
    if not 0 < a0 < a_star < a_inf:
        raise ValidationError(
            f"need 0 < a0 < a_star < a_inf, got a0={a0}, a_star={a_star}, "
            f"a_inf={a_inf}")
    if k <= 0:
        raise ValidationError("k must be positive")
    n_pop = solve_population(a0, a_inf, a_star)
    ratio = a_inf / (n_pop * _log_ratio(n_pop, a0, a_inf))  # gamma / beta
    if not 0 < ratio < 1:
        raise NoRootError(f"removal/infection ratio {ratio:.6g} outside (0, 1)")
    beta = k / (1.0 - ratio)
    gamma = beta - k
    return SirParams(beta=beta, gamma_rate=gamma, n_pop=n_pop, a_inf=a_inf,
                     a_star=a_star, a0=a0, r0=0.0)


def sir_residuals(sir: SirParams) -> tuple:
    """Relative residuals of the plateau equation and the inflection equation."""
    n, b, g = sir.n_pop, sir.beta, sir.gamma_rate
    plateau_term = n * g / b * _log_ratio(n, sir.a0, sir.a_inf)
    plateau = (sir.a_inf - plateau_term + sir.r0) / sir.a_inf
    infl_terms = (2 * b * sir.a_star,
                  n * (g * _log_ratio(n, sir.a0, sir.a_star) + b - g))
    inflection = (infl_terms[1] - infl_terms[0]) / max(map(abs, infl_terms))
    return plateau, inflection


def recover_from_fit(fit, a_star: float) -> SirParams:
    """Apply the latent-scale convention a0 = 1/(1 - alpha), A_inf = M*/(1 - alpha)."""
    params = fit.params if isinstance(fit, FitResult) else fit
    a0 = 1.0 / (1.0 - params.alpha)
    return recover_sir(a0, a_infinity(params), a_star, params.k)
