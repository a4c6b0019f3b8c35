"""Prior and posterior predictive distributions of ``A* = a(X*)``.

For models whose per-observation ``b`` does not depend on the data,
``A* | theta`` is Gamma(b, rate theta). Mixing over an inverse stable prior
gives

    p(a*) = b rho**b a***(b-1) E^{b+1}_{alpha, alpha b + 1}(-a* rho),

and mixing over the posterior given data summarized by ``(a, b_x)`` gives a
density proportional to ``a***(b-1) E^{b'+1}_{alpha, alpha b' + 1}(-(a + a*) rho)``
with ``b' = b + b_x``. For ``b = 1`` the power of ``a*`` drops out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NumericError
from .expfamily import ModelSpec, SuffStats, b_per_observation
from .rng import ISPrior, RngStream, sample_inverse_stable
from .special import gml_is_grid

__all__ = [
    "PredictiveSpec",
    "prior_predictive_pdf",
    "prior_predictive_moment",
    "posterior_predictive_kernel",
    "posterior_predictive_pdf",
    "posterior_predictive_normalizer",
    "sample_prior_predictive",
]


@dataclass(frozen=True)
class PredictiveSpec:
    """Model, prior and (for posterior predictives) the data summary."""

    model: ModelSpec
    prior: ISPrior
    posterior_stats: Optional[SuffStats] = None

    @property
    def b_star(self) -> float:
        try:
            return b_per_observation(self.model)
        except DomainError:
            raise DomainError(f"predictive distributions need a data-free b; {self.model.family} is unsupported")


def _grid_log(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise DomainError("a* must be nonnegative")
    return x


def prior_predictive_pdf(spec: PredictiveSpec, a_star):
    """Prior predictive density of ``A* = a(X*)``.

    Examples
    --------
    >>> from isprior.expfamily import ModelSpec
    >>> spec = PredictiveSpec(ModelSpec("exponential"), ISPrior(0.5, 1.0))
    >>> round(float(prior_predictive_pdf(spec, 0.0)), 5)  # 1/Gamma(1.5)
    1.12838
    """
    if spec.posterior_stats is not None:
        raise DomainError("spec carries posterior stats; use the posterior predictive")
    b = spec.b_star
    al, rho = spec.prior.alpha, spec.prior.rho
    x = _grid_log(a_star)
    lg = gml_is_grid(al, b, x * rho)
    with np.errstate(divide="ignore"):
        lpow = (b - 1.0) * np.log(x) if b != 1.0 else 0.0
    out = np.exp(math.log(b) + b * math.log(rho) + lpow + lg)
    return float(out[0]) if np.ndim(a_star) == 0 else out


def prior_predictive_moment(spec: PredictiveSpec, k: float) -> float:
    """``E[(A*)**k]`` under the prior predictive.

    Equals ``Gamma(b+k) Gamma(1-k) / (Gamma(b) rho**k Gamma(1 - alpha k))``,
    finite for ``-b < k < 1``.
    """
    b = spec.b_star
    al, rho = spec.prior.alpha, spec.prior.rho
    if not (-b < k < 1.0):
        raise DomainError(f"moment of order {k} does not exist (need {-b} < k < 1)")
    if k == 0:
        return 1.0
    lv = gammaln(b + k) + gammaln(1.0 - k) - gammaln(b) - k * math.log(rho) - gammaln(1.0 - al * k)
    return float(np.exp(lv))


def posterior_predictive_kernel(spec: PredictiveSpec, a_star):
    """Unnormalized posterior predictive density of ``A*``:
    ``a***(b*-1) rho**b* E^{b'+1}_{alpha, alpha b' + 1}(-(a + a*) rho)``."""
    st = spec.posterior_stats
    if st is None:
        raise DomainError("posterior predictive needs posterior_stats")
    bs = spec.b_star
    bp = bs + st.b
    al, rho = spec.prior.alpha, spec.prior.rho
    x = _grid_log(a_star)
    lg = gml_is_grid(al, bp, (st.a + x) * rho)
    with np.errstate(divide="ignore"):
        lpow = (bs - 1.0) * np.log(x) if bs != 1.0 else 0.0
    out = np.exp(bs * math.log(rho) + lpow + lg)
    return float(out[0]) if np.ndim(a_star) == 0 else out


def posterior_predictive_normalizer(spec: PredictiveSpec) -> float:
    """Integral of the kernel over ``a* > 0``, by trapezoid rule in ``log a*``
    with the power-law tail beyond the grid added in closed form."""
    st = spec.posterior_stats
    if st is None:
        raise DomainError("posterior predictive needs posterior_stats")
    rho = spec.prior.rho
    scale = (st.a + 1.0) / rho
    u = np.linspace(-45.0, 12.0, 11401) + math.log(scale)
    x = np.exp(u)
    f = posterior_predictive_kernel(spec, x) * x
    h = u[1] - u[0]
    # beyond the grid the kernel is a power law, x * kernel ~ x**-(b + 1)
    tail = f[-1] / (st.b + 1.0)
    full = h * (f.sum() - 0.5 * (f[0] + f[-1])) + tail
    half = 2 * h * (f[::2].sum() - 0.5 * (f[0] + f[-1])) + tail
    if not full > 0:
        raise NumericError("posterior predictive normalizer is not positive")
    if abs(half - full) > 1e-6 * full or tail > 1e-3 * full:
        raise NumericError("posterior predictive normalizer did not converge", achieved=abs(half - full) / full)
    return float(full)


def posterior_predictive_pdf(spec: PredictiveSpec, a_star):
    """Normalized posterior predictive density of ``A*``."""
    return posterior_predictive_kernel(spec, a_star) / posterior_predictive_normalizer(spec)


def sample_prior_predictive(spec: PredictiveSpec, n: int, rng: RngStream) -> np.ndarray:
    """Draws of ``A*``: ``theta`` from the prior, then ``A* | theta ~ Gamma(b, theta)``."""
    th = sample_inverse_stable(spec.prior, rng, n)
    return rng.generator.gamma(spec.b_star, 1.0 / th)
