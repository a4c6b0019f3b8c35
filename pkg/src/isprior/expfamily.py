"""One-parameter exponential-family data models.

Every model has a likelihood kernel ``exp(-a theta + b log theta)`` in its
rate / inverse-scale / precision parameter ``theta``. ``a`` and ``b`` are
sums of per-observation terms, which is what makes the inverse stable prior
tractable for all of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .rng import RngStream

__all__ = [
    "FAMILIES",
    "ModelSpec",
    "SuffStats",
    "sufficient_stats",
    "loglik_kernel",
    "sample_data",
    "mle_closed_form",
    "a_transform",
    "b_per_observation",
]


@dataclass(frozen=True)
class SuffStats:
    """Kernel summary ``(a, b)`` of ``n`` observations."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise DomainError(f"sufficient statistics must be nonnegative, got a={self.a}, b={self.b}")
        if self.n < 0:
            raise DomainError("n must be nonnegative")


@dataclass(frozen=True)
class _Family:
    a_term: Callable  # per-observation contribution to a
    b_term: Optional[Callable]  # per-observation b given nuisance; None if b depends on x
    support: str  # "count", "nonneg", "positive" or "real"
    sampler: Callable  # (gen, theta, n, nuisance) -> draws
    nuisance: Optional[str] = None


def _skew_logistic(gen, theta, n, _):
    # F(x) = (1 + e^-x)^-theta  =>  x = -log(U^(-1/theta) - 1)
    u = gen.random(n)
    return -np.log(np.expm1(-np.log(u) / theta))


def _gen_exponential(gen, theta, n, sigma):
    # F(x) = (1 - e^(-sigma x))^theta  =>  x = -log(1 - U^(1/theta)) / sigma
    u = gen.random(n)
    return -np.log(-np.expm1(np.log(u) / theta)) / sigma


FAMILIES = {
    # kernel theta^x e^-theta: a = n, b = sum x
    "poisson": _Family(lambda x, s: np.ones_like(x), None, "count", lambda g, t, n, s: g.poisson(t, n).astype(float)),
    # theta = 1/sigma^2
    "rayleigh": _Family(lambda x, s: x**2 / 2, lambda s: 1.0, "nonneg", lambda g, t, n, s: g.rayleigh(t**-0.5, n)),
    # density (2 sigma/pi) exp(-x^2 sigma^2/pi), theta = sigma^2
    "half_normal": _Family(
        lambda x, s: x**2 / np.pi,
        lambda s: 0.5,
        "nonneg",
        lambda g, t, n, s: np.abs(g.normal(0.0, np.sqrt(np.pi / (2 * t)), n)),
    ),
    # 1/X^2 ~ Exp(theta)
    "inverse_rayleigh": _Family(
        lambda x, s: 1.0 / x**2, lambda s: 1.0, "positive", lambda g, t, n, s: (g.exponential(1.0, n) / t) ** -0.5
    ),
    "exponential": _Family(lambda x, s: x, lambda s: 1.0, "nonneg", lambda g, t, n, s: g.exponential(1.0 / t, n)),
    "laplace": _Family(lambda x, s: np.abs(x), lambda s: 1.0, "real", lambda g, t, n, s: g.laplace(0.0, 1.0 / t, n)),
    # 1/X ~ Exp(theta)
    "inverse_exponential": _Family(
        lambda x, s: 1.0 / x, lambda s: 1.0, "positive", lambda g, t, n, s: t / g.exponential(1.0, n)
    ),
    "skew_logistic": _Family(lambda x, s: np.logaddexp(0.0, -x), lambda s: 1.0, "real", _skew_logistic),
    "gamma_known_shape": _Family(
        lambda x, s: x, lambda s: s, "nonneg", lambda g, t, n, s: g.gamma(s, 1.0 / t, n), nuisance="sigma"
    ),
    # theta = eps^-sigma, X^sigma ~ Exp(theta)
    "weibull_known_shape": _Family(
        lambda x, s: x**s,
        lambda s: 1.0,
        "nonneg",
        lambda g, t, n, s: (g.exponential(1.0, n) / t) ** (1.0 / s),
        nuisance="sigma",
    ),
    "normal_known_mean": _Family(
        lambda x, m: (x - m) ** 2 / 2,
        lambda m: 0.5,
        "real",
        lambda g, t, n, m: g.normal(m, t**-0.5, n),
        nuisance="mu",
    ),
    "generalized_exponential": _Family(
        lambda x, s: -np.log(-np.expm1(-s * x)), lambda s: 1.0, "positive", _gen_exponential, nuisance="sigma"
    ),
}


@dataclass(frozen=True)
class ModelSpec:
    """A data model and its known nuisance value, if any.

    ``nuisance`` is the known shape ``sigma`` for gamma / Weibull, the rate
    ``sigma`` for the generalized exponential, and the mean ``mu`` for the
    normal model.
    """

    family: str
    nuisance: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; choose from {sorted(FAMILIES)}")
        fam = FAMILIES[self.family]
        if fam.nuisance is None and self.nuisance is not None:
            raise DomainError(f"{self.family} takes no nuisance parameter")
        if fam.nuisance is not None:
            if self.nuisance is None:
                raise DomainError(f"{self.family} needs the nuisance parameter {fam.nuisance}")
            if fam.nuisance == "sigma" and not self.nuisance > 0:
                raise DomainError(f"{fam.nuisance} must be positive")
            if not np.isfinite(self.nuisance):
                raise DomainError("nuisance must be finite")

    @property
    def _fam(self) -> _Family:
        return FAMILIES[self.family]


def _check_support(model: ModelSpec, x: np.ndarray):
    kind = model._fam.support
    if x.ndim != 1 or x.size == 0:
        raise DomainError("data must be a nonempty 1-D sequence")
    if kind == "count":
        bad = ~((x >= 0) & (x == np.round(x)))
    elif kind == "nonneg":
        bad = ~(x >= 0)
    elif kind == "positive":
        bad = ~(x > 0)
    else:
        bad = ~np.isfinite(x)
    bad |= ~np.isfinite(x)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise DomainError(f"datum {i} ({x[i]!r}) is outside the support of {model.family}")


def a_transform(model: ModelSpec, x) -> np.ndarray:
    """Per-observation statistic ``a(x)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_support(model, x)
    return model._fam.a_term(x, model.nuisance)


def b_per_observation(model: ModelSpec) -> float:
    """Per-observation ``b``; raises for models whose ``b`` depends on the data."""
    fam = model._fam
    if fam.b_term is None:
        raise DomainError(f"{model.family} has a data-dependent b")
    return float(fam.b_term(model.nuisance))


def sufficient_stats(model: ModelSpec, data) -> SuffStats:
    """Kernel statistics ``(a, b, n)`` of a data set.

    Examples
    --------
    >>> sufficient_stats(ModelSpec("poisson"), [3, 1, 0])
    SuffStats(a=3.0, b=4.0, n=3)
    """
    x = np.atleast_1d(np.asarray(data, dtype=float))
    a = float(np.sum(a_transform(model, x)))
    n = int(x.size)
    if model.family == "poisson":
        b = float(np.sum(x))
    else:
        b = n * b_per_observation(model)
    return SuffStats(a, b, n)


def loglik_kernel(stats: SuffStats, theta):
    """``-a theta + b log theta``, with ``0 log 0`` read as 0."""
    theta = np.asarray(theta, dtype=float)
    blog = stats.b * np.log(theta) if stats.b > 0 else np.zeros_like(theta)
    out = -stats.a * theta + blog
    return float(out) if out.ndim == 0 else out


def sample_data(model: ModelSpec, theta: float, n: int, rng: RngStream) -> np.ndarray:
    """``n`` independent draws from the model at parameter ``theta``."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    if n < 1:
        raise DomainError("n must be positive")
    return np.asarray(model._fam.sampler(rng.generator, float(theta), int(n), model.nuisance), dtype=float)


def mle_closed_form(model: ModelSpec, data) -> float:
    """Maximum likelihood estimate ``b / a`` of ``theta``."""
    st = sufficient_stats(model, data)
    if st.a == 0:
        raise DomainError("MLE undefined when a = 0")
    if st.b == 0:
        raise DomainError("MLE is zero (b = 0), outside the parameter space")
    return st.b / st.a
