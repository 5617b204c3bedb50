"""Maximum-likelihood fitting and standard errors."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import (DEFAULT_FIXED, CountSeries, FitResult, ModelParams,
                   NonConvergence, SingularHessian,
                   ValidationError, free_names, from_unconstrained,
                   params_vector, to_unconstrained, with_values)
from .likelihood import log_likelihood
from .probability import truncation_bound

log = logging.getLogger(__name__)

PENALTY = 1e10


@dataclass(frozen=True)
class FitOptions:
    truncation: int | None = None
    truncation_factor: float = 1.5
    initial: str = "poisson"
    restarts: int = 5
    jitter: float = 0.5
    seed: int = 0
    simplex: bool = False
    simplex_maxfev: int = 1500
    polish_maxiter: int = 300
    grad_step: float = 1e-5
    hessian_step: float = 1e-4
    ftol: float = 1e-9
    xtol: float = 1e-7
    gtol: float = 1e-4
    compute_se: bool = True
    require_convergence: bool = False

    def replace(self, **changes) -> "FitOptions":
        from dataclasses import replace
        return replace(self, **changes)

    def bound_for(self, counts) -> int:
        if self.truncation is not None:
            return int(self.truncation)
        return truncation_bound(counts, self.truncation_factor)


def default_init(series: CountSeries) -> ModelParams:
    """Heuristic starting point.

    k comes from a log-linear fit of the cumulative counts over the early
    rising stretch (until a quarter of the total has accrued).  m_star is
    scaled so the implied latent total matches the observed total under the
    starting alpha and omega.
    """
    counts = np.asarray(series.counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValidationError("cannot initialise from an all-zero series")
    alpha, omega = 0.8, 0.5
    cumulative = np.cumsum(counts)
    days = np.arange(1, len(counts) + 1, dtype=float)
    start = int(np.argmax(cumulative > 0))
    stop = int(np.searchsorted(cumulative, 0.25 * total)) + 1
    seg = slice(start, max(stop, start + 3))
    x, c = days[seg], cumulative[seg]
    k = 0.2
    if len(x) >= 3 and np.ptp(x) > 0:
        slope = np.polyfit(x, np.log(c), 1, w=np.sqrt(c))[0]
        if math.isfinite(slope):
            k = float(np.clip(slope, 0.02, 1.5))
    report_rate = 1.0 - omega * 0.5
    m_star = max(total * (1.0 - alpha) / report_rate, 2.0)
    return ModelParams(alpha=alpha, m_star=m_star, k=k, omega=omega)


def _objective(series, template, fixed, max_state, initial):
    counts = series.counts

    def nll(u):
        try:
            params = from_unconstrained(u, template, fixed)
        except (ValidationError, OverflowError):
            return PENALTY
        value = -log_likelihood(counts, params, max_state, initial)
        return value if math.isfinite(value) else PENALTY
    return nll


def central_gradient(func, x, step):
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (func(x + e) - func(x - e)) / (2.0 * step)
    return grad


def numerical_hessian(func, x, steps) -> np.ndarray:
    """Central-difference Hessian, symmetrized."""
    x = np.asarray(x, dtype=float)
    h = np.broadcast_to(np.asarray(steps, dtype=float), x.shape)
    d = x.size
    f0 = func(x)
    hess = np.empty((d, d))
    unit = np.eye(d) * h
    for i in range(d):
        hess[i, i] = (func(x + unit[i]) - 2.0 * f0 + func(x - unit[i])) / h[i] ** 2
        for j in range(i):
            ei, ej = unit[i], unit[j]
            value = (func(x + ei + ej) - func(x + ei - ej)
                     - func(x - ei + ej) + func(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = value
    return 0.5 * (hess + hess.T)


def covariance_from_hessian(hess) -> np.ndarray:
    """Inverse of the negative Hessian of a log-likelihood at its maximum."""
    info = -np.asarray(hess, dtype=float)
    if info.size == 0:
        return np.zeros((0, 0))
    eig = np.linalg.eigvalsh(info)
    if not np.all(np.isfinite(eig)) or eig.min() <= 0:
        raise SingularHessian(
            f"observed information not positive definite (eigenvalue {eig.min():.3g})",
            eigenvalue=float(eig.min()))
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    diag = np.diag(cov)
    if np.any(diag <= 0):
        raise SingularHessian("nonpositive variance in inverse information",
                              eigenvalue=float(eig.min()))
    return cov


def _natural_steps(params, names, rel_step):
    steps = []
    for name in names:
        value = getattr(params, name)
        h = rel_step * max(abs(value), 1.0)
        if name in ("alpha", "omega"):
            h = min(h, 0.25 * value, 0.25 * (1.0 - value))
        elif name in ("m_star", "k"):
            h = min(h, 0.25 * value)
        elif name == "a0":
            h = min(h, 0.25 * (value - 1.0)) if value > 1.0 else h
        steps.append(h)
    return np.array(steps)


def standard_errors(series, fit_params: ModelParams, fixed=DEFAULT_FIXED,
                    trunc=None, initial: str = "poisson", rel_step: float = 1e-4):
    """Natural-scale standard errors and covariance of the free parameters."""
    names = free_names(fixed)
    counts = series.counts if isinstance(series, CountSeries) else np.asarray(series)
    max_state = int(trunc) if trunc is not None else truncation_bound(counts)

    def loglik(values):
        try:
            params = with_values(fit_params, names, values)
        except ValidationError:
            return -PENALTY
        return log_likelihood(counts, params, max_state, initial)

    x0 = params_vector(fit_params, names)
    hess = numerical_hessian(loglik, x0, _natural_steps(fit_params, names, rel_step))
    cov = covariance_from_hessian(hess)
    ses = {name: float(math.sqrt(cov[i, i])) for i, name in enumerate(names)}
    return ses, cov


class _Tracker:
    """Wraps the objective to remember the best point ever evaluated."""

    def __init__(self, func):
        self.func = func
        self.best_x = None
        self.best_f = math.inf
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        value = self.func(x)
        if value < self.best_f:
            self.best_f, self.best_x = value, np.array(x, dtype=float)
        return value


def _single_start(nll, u0, options):
    tracker = _Tracker(nll)
    tracker(u0)
    x = u0
    if options.simplex:
        minimize(tracker, x, method="Nelder-Mead",
                 options=dict(maxfev=options.simplex_maxfev, adaptive=True,
                              xatol=1e-4, fatol=1e-6))
        x = tracker.best_x

    def jac(u):
        return central_gradient(tracker, u, options.grad_step)

    iterates = []
    res = minimize(tracker, x, jac=jac, method="BFGS",
                   callback=lambda u: iterates.append((nll(u), np.array(u))),
                   options=dict(maxiter=options.polish_maxiter, gtol=options.gtol))
    x_best, f_best = tracker.best_x, tracker.best_f
    converged = bool(res.success)
    if not converged and len(iterates) >= 2:
        (f1, x1), (f2, x2) = iterates[-2:]
        small_gain = abs(f1 - f2) <= options.ftol * max(abs(f2), 1.0)
        small_step = np.max(np.abs(x2 - x1)) <= options.xtol
        converged = small_gain and small_step
    if not converged:
        converged = bool(np.max(np.abs(jac(x_best))) < 10 * options.gtol)
    return x_best, f_best, converged, res.message, tracker.calls


def fit(series: CountSeries, init: ModelParams | None = None,
        fixed=DEFAULT_FIXED, options: FitOptions | None = None) -> FitResult:
    """Maximize the forward log-likelihood over the free parameters.

    Each start runs BFGS with central-difference gradients in unconstrained
    coordinates, optionally preceded by a Nelder-Mead search
    (``options.simplex``).  The best of ``options.restarts`` starts (the
    first un-jittered) is kept.
    """
    options = options or FitOptions()
    fixed = frozenset(fixed)
    init = init or default_init(series)
    names = free_names(fixed)
    if "a0" in names and init.a0 - 1.0 < 1e-6:
        init = init.replace(a0=1.0 + 1e-3)
    max_state = options.bound_for(series.counts)
    if max_state < series.counts.max():
        raise ValidationError("truncation below the largest observed count")
    init_ll = log_likelihood(series.counts, init, max_state, options.initial)

    if not names:
        if not math.isfinite(init_ll):
            raise NonConvergence("log-likelihood at the fixed parameters is not finite")
        return FitResult(params=init, log_likelihood=init_ll, converged=True,
                         truncation=max_state, fixed=fixed, std_errors={},
                         covariance=np.zeros((0, 0)), initial=options.initial,
                         message="all parameters fixed")

    nll = _objective(series, init, fixed, max_state, options.initial)
    u0 = to_unconstrained(init, fixed)
    rng = np.random.default_rng(options.seed)
    starts = [u0] + [u0 + rng.normal(0.0, options.jitter, u0.size)
                     for _ in range(max(options.restarts, 1) - 1)]
    best = None
    calls = 0
    for index, start in enumerate(starts):
        x, f, ok, message, n_calls = _single_start(nll, start, options)
        calls += n_calls
        log.debug("start %d: nll=%.6f converged=%s", index, f, ok)
        if best is None or f < best[1]:
            best = (x, f, ok, message)
    x, f, converged, message = best
    if not f < PENALTY:
        raise NonConvergence("no start reached a finite log-likelihood")
    params = from_unconstrained(x, init, fixed)
    loglik = log_likelihood(series.counts, params, max_state, options.initial)
    if math.isfinite(init_ll) and loglik < init_ll:
        params, loglik = init, init_ll

    ses, cov, se_message = None, None, ""
    if options.compute_se:
        try:
            ses, cov = standard_errors(series, params, fixed, max_state,
                                       options.initial, options.hessian_step)
        except SingularHessian as exc:
            se_message = f"; standard errors unavailable: {exc}"
            log.warning("standard errors unavailable: %s", exc)
    result = FitResult(params=params, log_likelihood=loglik, converged=converged,
                       truncation=max_state, fixed=fixed, std_errors=ses,
                       covariance=cov, initial=options.initial,
                       message=str(message) + se_message, n_evaluations=calls)
    if options.require_convergence and not converged:
        raise NonConvergence(f"optimizer did not converge: {message}", result)
    return result
