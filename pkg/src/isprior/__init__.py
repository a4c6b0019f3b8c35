"""Bayesian inference for exponential-family rate parameters under the
inverse stable prior ``Theta = rho * S**(-alpha)``, ``S`` positive stable."""

from .errors import BudgetError, DegeneracyWarning, DomainError, NumericError, RegimeError
from .expfamily import ModelSpec, SuffStats, sufficient_stats
from .posterior import (
    PosteriorSpec,
    bayes_estimate_mc,
    posterior_moment,
    posterior_pdf,
    posterior_sample_ar,
)
from .rng import ISPrior, RngStream, sample_alpha_stable, sample_inverse_stable
from .special import gml, gml_mc, gml_series, inverse_stable_pdf, stable_pdf

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "DegeneracyWarning",
    "DomainError",
    "NumericError",
    "RegimeError",
    "ModelSpec",
    "SuffStats",
    "sufficient_stats",
    "PosteriorSpec",
    "bayes_estimate_mc",
    "posterior_moment",
    "posterior_pdf",
    "posterior_sample_ar",
    "ISPrior",
    "RngStream",
    "sample_alpha_stable",
    "sample_inverse_stable",
    "gml",
    "gml_mc",
    "gml_series",
    "inverse_stable_pdf",
    "stable_pdf",
]
