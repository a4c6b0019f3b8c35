"""Posterior of an exponential-family parameter under the inverse stable prior.

With likelihood kernel ``exp(-a theta) theta**b`` and prior IS(alpha, rho) the
posterior density is

    exp(-a theta) theta**b IS(theta) / (Gamma(b+1) rho**b E^{b+1}_{alpha, alpha b+1}(-a rho)),

and its moments and moment generating function are ratios of generalized
Mittag-Leffler values. Two Monte Carlo routes are provided as well: a
self-normalized estimator over prior draws and an exact accept-reject sampler
that uses prior draws as proposals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import BudgetError, DomainError, NumericError
from .expfamily import SuffStats
from .rng import ISPrior, RngStream, inverse_stable_log_draws
from .special import GMLArgs, gml, gml_series, inverse_stable_logpdf

__all__ = [
    "PosteriorSpec",
    "PosteriorDraws",
    "MCEstimate",
    "HeavyTailSpec",
    "log_normalizer",
    "posterior_logpdf",
    "posterior_pdf",
    "posterior_moment",
    "posterior_mgf",
    "bayes_estimate_mc",
    "posterior_sample_ar",
    "heavy_tail_adjust",
    "DEFAULT_MAX_PROPOSALS",
]

DEFAULT_MAX_PROPOSALS = 20_000_000


@dataclass(frozen=True)
class PosteriorSpec:
    stats: SuffStats
    prior: ISPrior


@dataclass(frozen=True)
class PosteriorDraws:
    """Accepted draws from the accept-reject sampler."""

    draws: np.ndarray
    proposals_used: int
    acceptance_rate: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.draws))

    @property
    def std_error(self) -> float:
        return float(np.std(self.draws, ddof=1) / math.sqrt(self.draws.size))


@dataclass(frozen=True)
class MCEstimate:
    """Self-normalized Monte Carlo estimate of a posterior moment.

    ``variance`` is the posterior variance estimate E[T^2] - E[T]^2 and
    ``std_error`` the delta-method standard error of ``estimate``.
    """

    estimate: float
    variance: float
    std_error: float
    ess: float
    n_draws: int


@dataclass(frozen=True)
class HeavyTailSpec:
    alpha: float
    alpha_prime: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= self.alpha_prime < 1.0):
            raise DomainError("heavy-tailed prior needs 0 < alpha <= alpha_prime < 1")


def _log_gml_is(alpha, omega, x):
    """log E^{omega+1}_{alpha, alpha omega + 1}(-x)."""
    return gml(alpha, alpha * omega + 1.0, omega + 1.0, -x).log_value


@lru_cache(maxsize=4096)
def _log_norm(a, b, alpha, rho):
    return float(gammaln(b + 1.0)) + b * math.log(rho) + _log_gml_is(alpha, b, a * rho)


def log_normalizer(spec: PosteriorSpec) -> float:
    """log of ``Gamma(b+1) rho**b E^{b+1}_{alpha, alpha b + 1}(-a rho)``."""
    st, pr = spec.stats, spec.prior
    return _log_norm(st.a, st.b, pr.alpha, pr.rho)


def posterior_logpdf(spec: PosteriorSpec, theta):
    st = spec.stats
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(th <= 0):
        raise DomainError("theta must be positive")
    blog = st.b * np.log(th) if st.b > 0 else 0.0
    out = -st.a * th + blog + inverse_stable_logpdf(spec.prior, th) - log_normalizer(spec)
    return float(out[0]) if np.ndim(theta) == 0 else out


def posterior_pdf(spec: PosteriorSpec, theta):
    """Normalized posterior density at ``theta``."""
    return np.exp(posterior_logpdf(spec, theta))


def posterior_moment(spec: PosteriorSpec, k: float) -> float:
    """``E[theta**k | x]`` for real ``k > -(b+1)``."""
    st, pr = spec.stats, spec.prior
    if not k + st.b + 1.0 > 0:
        raise DomainError("posterior moment needs k + b + 1 > 0")
    if k == 0:
        return 1.0
    lnum = float(gammaln(k + st.b + 1.0)) + k * math.log(pr.rho) + _log_gml_is(pr.alpha, k + st.b, st.a * pr.rho)
    lden = float(gammaln(st.b + 1.0)) + _log_gml_is(pr.alpha, st.b, st.a * pr.rho)
    return math.exp(lnum - lden)


def posterior_mgf(spec: PosteriorSpec, beta: float) -> float:
    """``E[exp(beta theta) | x]``.

    For ``beta > a`` the numerator has a positive argument and only the
    series is available, under the usual regime guard.
    """
    st, pr = spec.stats, spec.prior
    if beta == 0:
        return 1.0
    w = -(st.a - beta) * pr.rho
    nu, tau = pr.alpha * st.b + 1.0, st.b + 1.0
    if w > 0:
        num = gml_series(GMLArgs(pr.alpha, nu, tau, w)).log_value
    else:
        num = gml(pr.alpha, nu, tau, w).log_value
    return math.exp(num - _log_gml_is(pr.alpha, st.b, st.a * pr.rho))


def _log_weights(a, b, log_y):
    lw = -a * np.exp(log_y)
    if b > 0:
        lw = lw + b * log_y
    return lw


def bayes_estimate_mc(spec: PosteriorSpec, k: float, n_draws: int, rng: RngStream) -> MCEstimate:
    """Monte Carlo posterior moment from prior draws by self-normalized weighting.

    The ratios of Monte Carlo Mittag-Leffler estimates reduce to a
    self-normalized average over ``Y = rho S**(-alpha)`` with weights
    ``exp(-a Y) Y**b``. All ratios share one set of draws.
    """
    if n_draws < 1:
        raise DomainError("n_draws must be positive")
    st = spec.stats
    log_y = inverse_stable_log_draws(spec.prior, rng, n_draws)
    lw = _log_weights(st.a, st.b, log_y)
    w = np.exp(lw - lw.max())
    sw = w.sum()
    if not sw > 0:
        raise NumericError("importance weights vanished")
    p = w / sw
    yk = np.exp(k * log_y)
    est = float(p @ yk)
    y = np.exp(log_y)
    m1 = float(p @ y)
    var = max(float(p @ (y * y)) - m1 * m1, 0.0)
    se = float(math.sqrt(np.sum(p * p * (yk - est) ** 2)))
    ess = float(1.0 / np.sum(p * p))
    return MCEstimate(est, var, se, ess, n_draws)


def posterior_sample_ar(
    spec: PosteriorSpec,
    n_samples: int,
    rng: RngStream,
    max_proposals: int = DEFAULT_MAX_PROPOSALS,
) -> PosteriorDraws:
    """Exact posterior draws by accept-reject with prior proposals.

    A proposal ``y`` is accepted when
    ``log u < b [log(a y / b) + 1] - a y``; since ``exp(-a y) y**b`` peaks at
    ``y = b/a`` this is acceptance with probability proportional to the
    likelihood. For ``b = 0`` the bracket term is taken to be 0.

    Raises
    ------
    BudgetError
        If ``max_proposals`` run out first. ``err.partial`` holds the
        accepted draws.
    """
    st = spec.stats
    if n_samples < 1:
        raise DomainError("n_samples must be positive")
    if st.a == 0 and st.b > 0:
        raise DomainError("accept-reject needs a > 0 when b > 0 (likelihood kernel is unbounded)")
    accepted: list[np.ndarray] = []
    n_acc = 0
    used = 0
    rate = 0.5
    while n_acc < n_samples:
        left = max_proposals - used
        if left <= 0:
            partial = np.concatenate(accepted) if accepted else np.empty(0)
            raise BudgetError(
                f"accepted {n_acc} of {n_samples} draws in {used} proposals",
                partial=PosteriorDraws(partial, used, n_acc / used if used else 0.0),
            )
        batch = int(min(left, max(1024, 1.2 * (n_samples - n_acc) / max(rate, 1e-6))))
        log_y = inverse_stable_log_draws(spec.prior, rng, batch)
        y = np.exp(log_y)
        if st.b > 0:
            bound = st.b * (np.log(st.a / st.b) + log_y + 1.0) - st.a * y
        else:
            bound = -st.a * y
        log_u = np.log(rng.uniform(batch))
        ok = log_u < bound
        got = y[ok]
        need = n_samples - n_acc
        if got.size >= need:
            # count proposals only up to the one that completed the sample
            last = int(np.nonzero(ok)[0][need - 1])
            used += last + 1
            accepted.append(got[:need])
            n_acc = n_samples
            break
        accepted.append(got)
        n_acc += got.size
        used += batch
        rate = max(n_acc / used, 1e-6)
    draws = np.concatenate(accepted)
    return PosteriorDraws(draws, used, n_samples / used)


def heavy_tail_adjust(stats: SuffStats, ht: HeavyTailSpec) -> SuffStats:
    """Fold the heavy-tail factor ``theta**(-1 - alpha'/alpha)`` into ``b``.

    Downstream routines then run unchanged with ``b' = b - (alpha + alpha')/alpha``
    and a unit-scale prior.
    """
    shift = (ht.alpha + ht.alpha_prime) / ht.alpha
    if stats.b < shift - 1e-12:
        raise DomainError(
            f"heavy-tailed prior needs b >= (alpha + alpha')/alpha = {shift:.6g} (so at least b >= 2); got b={stats.b}"
        )
    return SuffStats(stats.a, max(stats.b - shift, 0.0), stats.n)
