"""Hidden INAR(1) model for under-reported epidemic counts.

The latent daily count follows an INAR(1) process whose Poisson innovation
means are the increments of a logistic affected curve; each day is
under-reported with probability omega, in which case the truth is thinned
with a time-varying intensity q_n.
"""

from .core import (DEFAULT_FIXED, PARAM_NAMES, CountSeries, FitResult, LatentPath,
                   ModelError, ModelParams, NoRootError, NonConvergence, SingularHessian,
                   SirParams, UndefinedRate, ValidationError)
from .decoding import CoverageReport, coverage_from_totals, coverage_summary, viterbi
from .estimation import FitOptions, default_init, fit, standard_errors
from .forecast import (ForecastDistribution, dynamic_forecast, forecast_distribution,
                       point_forecast, point_forecast_se, static_forecast)
from .likelihood import TruncationBound, forward, initial_distribution, log_likelihood
from .probability import emission_pmf, q_values, transition_pmf, truncation_bound
from .reports import ingest_csv, load_fit
from .simulate import simulate_ahead, simulate_series, thin
from .sir import (GrowthCurve, affected, innovation_mean, innovation_means,
                  recover_from_fit, recover_sir, solve_population)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FIXED", "PARAM_NAMES", "CountSeries", "CoverageReport", "FitOptions",
    "FitResult", "ForecastDistribution", "GrowthCurve", "LatentPath", "ModelError",
    "ModelParams", "NoRootError", "NonConvergence", "SingularHessian", "SirParams",
    "TruncationBound", "UndefinedRate", "ValidationError", "affected",
    "coverage_from_totals", "coverage_summary", "default_init", "dynamic_forecast",
    "emission_pmf", "fit", "forecast_distribution", "forward", "ingest_csv",
    "initial_distribution", "innovation_mean", "innovation_means", "load_fit",
    "log_likelihood", "point_forecast", "point_forecast_se", "q_values",
    "recover_from_fit", "recover_sir", "simulate_ahead", "simulate_series",
    "solve_population", "standard_errors", "static_forecast", "thin",
    "transition_pmf", "truncation_bound", "viterbi",
]
