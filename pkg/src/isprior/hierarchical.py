"""Hierarchical models with an inverse stable mixing prior.

Covers the marginal prior kernel, Gibbs samplers for the normal-normal and
Poisson-exponential hierarchies, global and local normal-means shrinkage
(with the inverted-beta baseline), the implied prior on the shrinkage factor
``kappa = theta / (1 + theta)``, and a three-block Gibbs sampler with a grid
hyperprior for pooled Poisson counts.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln, logsumexp

from .errors import DegeneracyWarning, DomainError, NumericError
from .expfamily import SuffStats
from .posterior import PosteriorSpec, posterior_sample_ar
from .rng import ISPrior, RngStream, inverse_stable_log_draws
from .special import gml, inverse_stable_logpdf, inverse_stable_pdf, stable_logpdf

__all__ = [
    "GibbsChain",
    "ShrinkageResult",
    "HyperPosterior",
    "GridSpec",
    "marginal_prior_kernel",
    "gibbs_normal_normal",
    "gibbs_poisson_exponential",
    "poisson_unequal_rates",
    "shrinkage_global_is",
    "shrinkage_global_invbeta",
    "shrinkage_local_is",
    "kappa_prior_pdf",
    "marginal_lik_hyper",
    "grid_mle_hyper",
    "gibbs_quine",
]

MIN_ESS = 50.0


@dataclass
class GibbsChain:
    lambda_draws: np.ndarray
    theta_draws: np.ndarray
    hyper_draws: Optional[np.ndarray] = None  # (iters, 2) columns alpha, rho
    burn_in: int = 0

    def kept(self, name: str) -> np.ndarray:
        """Post burn-in draws of ``lambda``, ``theta``, ``alpha`` or ``rho``."""
        if name in ("alpha", "rho"):
            if self.hyper_draws is None:
                raise DomainError("chain has no hyperparameter draws")
            return self.hyper_draws[self.burn_in :, 0 if name == "alpha" else 1]
        return getattr(self, f"{name}_draws")[self.burn_in :]


@dataclass
class ShrinkageResult:
    """Posterior means of the normal / Poisson means and a kappa summary.

    ``normalizer`` is the Monte Carlo estimate of the marginal likelihood
    constant (the inverse of ``K``), or the quadrature value for the
    inverted-beta baseline; it can overflow for large ``|x|^2``, so its log
    is kept in ``log_normalizer``. ``ess`` is the importance-sampling
    effective sample size (``nan`` where no weights are involved).
    """

    posterior_means: np.ndarray
    kappa_mean: float
    kappa_quantiles: tuple
    log_normalizer: float
    ess: float = float("nan")

    @property
    def normalizer(self) -> float:
        return math.exp(self.log_normalizer) if self.log_normalizer < 709.0 else math.inf


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _iters(iters, burn_in):
    if not (0 <= burn_in < iters):
        raise DomainError("need 0 <= burn_in < iters")


def marginal_prior_kernel(g_value, b: float, prior: ISPrior):
    """Unnormalized marginal prior ``E^{b+1}_{alpha, alpha b + 1}(-g rho)``.

    This is the result of mixing ``exp(-g(lambda) theta) theta**b`` over an
    inverse stable ``theta``; pass ``g = lambda**2 / 2, b = 1/2`` for the
    normal-normal model or ``g = lambda, b = 1`` for Poisson-exponential.
    """
    g = np.atleast_1d(np.asarray(g_value, dtype=float))
    if np.any(g < 0):
        raise DomainError("g_value must be nonnegative")
    al, rho = prior.alpha, prior.rho
    out = np.array([gml(al, al * b + 1.0, b + 1.0, -gi * rho).value for gi in g])
    return float(out[0]) if np.ndim(g_value) == 0 else out


# ---------------------------------------------------------------------------
# Gibbs samplers with an accept-reject theta step


def _theta_step(a, b, prior, rng):
    spec = PosteriorSpec(SuffStats(a, b, 1), prior)
    return float(posterior_sample_ar(spec, 1, rng).draws[0])


def gibbs_normal_normal(
    xbar: float, n: int, prior: ISPrior, iters: int, burn_in: int, rng: RngStream
) -> GibbsChain:
    """Gibbs sampler for ``X_j | lambda ~ N(lambda, 1)``, ``lambda | theta ~ N(0, 1/theta)``.

    ``lambda | x, theta ~ N(xbar / (1 + theta/n), 1/(n + theta))`` and
    ``theta | lambda`` has kernel ``theta**(1/2) exp(-lambda**2 theta / 2)``
    under the prior, sampled exactly by accept-reject.
    """
    _iters(iters, burn_in)
    if n < 1:
        raise DomainError("n must be positive")
    gen = rng.generator
    lam = np.empty(iters)
    th = np.empty(iters)
    theta = prior.mean
    for i in range(iters):
        prec = n + theta
        lam_i = gen.normal(n * xbar / prec, 1.0 / math.sqrt(prec))
        theta = _theta_step(lam_i * lam_i / 2.0, 0.5, prior, rng)
        lam[i], th[i] = lam_i, theta
    return GibbsChain(lam, th, None, burn_in)


def gibbs_poisson_exponential(
    counts: Sequence[int], prior: ISPrior, iters: int, burn_in: int, rng: RngStream
) -> GibbsChain:
    """Gibbs sampler for ``X_j | lambda ~ Poisson(lambda)``, ``lambda | theta ~ Exp(theta)``.

    ``lambda | x, theta ~ Gamma(sum x + 1, rate n + theta)`` and
    ``theta | lambda`` has kernel ``theta exp(-lambda theta)`` under the prior.
    """
    _iters(iters, burn_in)
    x = _counts(counts)
    w, n = float(x.sum()), x.size
    gen = rng.generator
    lam = np.empty(iters)
    th = np.empty(iters)
    theta = prior.mean
    for i in range(iters):
        lam_i = gen.gamma(w + 1.0, 1.0 / (n + theta))
        theta = _theta_step(lam_i, 1.0, prior, rng)
        lam[i], th[i] = lam_i, theta
    return GibbsChain(lam, th, None, burn_in)


def _counts(counts):
    x = np.atleast_1d(np.asarray(counts, dtype=float))
    if x.size == 0:
        raise DomainError("counts must be nonempty")
    if np.any(x < 0) or np.any(x != np.round(x)):
        i = int(np.nonzero((x < 0) | (x != np.round(x)))[0][0])
        raise DomainError(f"count {i} ({x[i]}) is not a nonnegative integer")
    return x


# ---------------------------------------------------------------------------
# importance-sampled shrinkage


def _snis(log_w):
    m = log_w.max(axis=-1, keepdims=True)
    w = np.exp(log_w - m)
    s = w.sum(axis=-1, keepdims=True)
    p = w / s
    ess = 1.0 / np.sum(p * p, axis=-1)
    log_norm = (m + np.log(s)).squeeze(-1) - math.log(log_w.shape[-1])
    return p, ess, log_norm


def _warn_ess(ess):
    low = float(np.min(ess))
    if low < MIN_ESS:
        warnings.warn(f"importance weights degenerate: effective sample size {low:.1f}", DegeneracyWarning, stacklevel=3)


def _kappa_summary(kappa, p):
    order = np.argsort(kappa)
    cdf = np.cumsum(p[order])
    qs = tuple(float(kappa[order][min(np.searchsorted(cdf, q), kappa.size - 1)]) for q in (0.025, 0.5, 0.975))
    return float(p @ kappa), qs


def poisson_unequal_rates(counts, alpha: float, n_draws: int, rng: RngStream) -> ShrinkageResult:
    """Posterior means for ``X_i ~ Poisson(lambda_i)``, ``lambda_i | theta ~ Exp(theta)``.

    Given ``theta``, ``E(lambda_i | x, theta) = (x_i + 1) / (1 + theta)``; the
    ``theta`` posterior is proportional to ``(1-kappa)**sum(x) kappa**n IS(theta)``
    and is handled by self-normalized importance sampling from the prior.
    """
    _check_alpha(alpha)
    x = _counts(counts)
    log_th = inverse_stable_log_draws(ISPrior(alpha, 1.0), rng, n_draws)
    log_k = -np.logaddexp(0.0, -log_th)  # log kappa
    log_1mk = -np.logaddexp(0.0, log_th)  # log(1 - kappa)
    p, ess, log_norm = _snis(x.size * log_k + x.sum() * log_1mk)
    _warn_ess(ess)
    shrink = float(p @ np.exp(log_1mk))
    km, kq = _kappa_summary(np.exp(log_k), p)
    return ShrinkageResult((x + 1.0) * shrink, km, kq, float(log_norm), float(ess))


def shrinkage_global_is(x, alpha: float, n_draws: int, rng: RngStream) -> ShrinkageResult:
    """Global shrinkage ``X_i ~ N(lambda_i, 1)``, ``lambda_i | theta ~ N(0, 1/theta)``.

    ``E(lambda_i | x) = x_i E[1 - kappa | x]`` with the ``theta`` posterior
    proportional to ``kappa**(n/2) exp(-kappa |x|^2 / 2) IS(theta)``, which
    differs from ``kappa**(n/2) exp((1 - kappa)|x|^2/2) IS(theta)`` only by
    the constant ``exp(|x|^2/2)``.
    """
    _check_alpha(alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 0:
        raise DomainError("x must be nonempty")
    s = float(x @ x)
    log_th = inverse_stable_log_draws(ISPrior(alpha, 1.0), rng, n_draws)
    log_k = -np.logaddexp(0.0, -log_th)
    k = np.exp(log_k)
    p, ess, log_norm = _snis(0.5 * x.size * log_k - 0.5 * s * k)
    _warn_ess(ess)
    shrink = float(p @ np.exp(-np.logaddexp(0.0, log_th)))
    km, kq = _kappa_summary(k, p)
    # report the normalizer of the (1 - kappa) form
    return ShrinkageResult(x * shrink, km, kq, float(log_norm + 0.5 * s), float(ess))


def shrinkage_local_is(x, alpha: float, n_draws: int, rng: RngStream) -> ShrinkageResult:
    """Local shrinkage: one ``theta_i`` per coordinate, each with its own posterior
    ``kappa_i**(1/2) exp(-kappa_i x_i**2 / 2) IS(theta_i)``.

    All coordinates reuse one pool of prior draws.
    """
    _check_alpha(alpha)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 0:
        raise DomainError("x must be nonempty")
    log_th = inverse_stable_log_draws(ISPrior(alpha, 1.0), rng, n_draws)
    log_k = -np.logaddexp(0.0, -log_th)
    k = np.exp(log_k)
    one_mk = np.exp(-np.logaddexp(0.0, log_th))
    means = np.empty(x.size)
    ess_all = np.empty(x.size)
    kbar = np.empty(x.size)
    for i, xi in enumerate(x):
        p, ess, _ = _snis(0.5 * log_k - 0.5 * xi * xi * k)
        means[i] = xi * float(p @ one_mk)
        ess_all[i] = ess
        kbar[i] = float(p @ k)
    _warn_ess(ess_all)
    return ShrinkageResult(
        means, float(kbar.mean()), tuple(np.quantile(kbar, [0.025, 0.5, 0.975])), math.nan, float(ess_all.min())
    )


def _invbeta_kappa_moments(n, s):
    """Mean of kappa' = 1/(1+delta^2) under the inverted-beta posterior, and its log normalizer.

    In kappa' the posterior is proportional to
    ``kappa'**((n-1)/2) (1 - kappa')**(-1/2) exp(-s kappa'/2)``.
    """
    c = 0.5 * (n - 1)
    peak = min(max(2.0 * c / s, 0.0), 1.0) if s > 0 else 1.0
    # scale by the log-integrand at its maximum so large s does not underflow
    log_top = (c * math.log(peak) if c > 0 and peak > 0 else 0.0) - 0.5 * s * peak

    def f(k, power):
        if k <= 0.0:
            return 0.0 if c + power > 0 else math.exp(-log_top)
        return math.exp((c + power) * math.log(k) - 0.5 * s * k - log_top)

    def integral(power):
        val, err = integrate.quad(f, 0.0, 1.0, args=(power,), weight="alg", wvar=(0.0, -0.5), limit=400, epsabs=0.0, epsrel=1e-10)
        if not np.isfinite(val) or err > 1e-7 * abs(val):
            raise NumericError("inverted-beta posterior quadrature failed", achieved=err / abs(val) if val else np.inf)
        return val

    z0 = integral(0.0)
    z1 = integral(1.0)
    return z1 / z0, math.log(z0) + log_top


def shrinkage_global_invbeta(x) -> ShrinkageResult:
    """Global shrinkage under the inverted-beta prior
    ``(delta^2)^(-1/2) (1 + delta^2)^(-1)`` on ``lambda_i | delta ~ N(0, delta^2)``.

    ``E(lambda_i | x) = x_i (1 - E[kappa' | x])`` with ``kappa' = 1/(1 + delta^2)``,
    computed by one-dimensional quadrature.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size == 0:
        raise DomainError("x must be nonempty")
    s = float(x @ x)
    km, log_z = _invbeta_kappa_moments(x.size, s)
    return ShrinkageResult(x * (1.0 - km), km, (math.nan,) * 3, log_z)


def kappa_prior_pdf(alpha: float, kappa):
    """Prior density of ``kappa = theta/(1 + theta)`` for ``theta ~ IS(alpha, 1)``:
    ``IS(kappa/(1-kappa)) / (1-kappa)**2``."""
    _check_alpha(alpha)
    k = np.atleast_1d(np.asarray(kappa, dtype=float))
    if np.any((k <= 0) | (k >= 1)):
        raise DomainError("kappa must lie in (0, 1)")
    out = inverse_stable_pdf(ISPrior(alpha, 1.0), k / (1.0 - k)) / (1.0 - k) ** 2
    return float(out[0]) if np.ndim(kappa) == 0 else out


# ---------------------------------------------------------------------------
# hyperparameters for pooled Poisson counts


def _log_marg_terms(log_th, n, w):
    # log of theta n^w / (n + theta)^(w+1)
    return log_th + w * math.log(n) - (w + 1.0) * np.logaddexp(math.log(n), log_th)


def marginal_lik_hyper(counts, alpha: float, rho: float, n_draws: int, rng: RngStream) -> float:
    """Log marginal likelihood of ``W = sum x`` under the Poisson-exponential
    model, ``log E_Theta[Theta n**w / (n + Theta)**(w+1)]`` by Monte Carlo."""
    x = _counts(counts)
    log_th = inverse_stable_log_draws(ISPrior(alpha, rho), rng, n_draws)
    lt = _log_marg_terms(log_th, x.size, float(x.sum()))
    return float(logsumexp(lt) - math.log(n_draws))


def grid_mle_hyper(counts, alphas, rhos, n_draws: int, rng: RngStream, per_unit: bool = False):
    """Grid search for the hyperparameters maximizing the marginal likelihood.

    The same stable draws are reused at every grid point, so the surface is
    smooth in ``(alpha, rho)``. With ``per_unit`` each count gets its own
    ``(lambda_i, theta_i)`` and the log-likelihood is the sum of per-count
    marginals ``E[theta/(1+theta)**(x_i+1)]``; with pooled data only ``W``
    enters and ``alpha`` is weakly identified.

    Returns
    -------
    best : tuple
        ``(alpha, rho)`` at the maximum.
    surface : ndarray
        Log marginal likelihood, shape ``(len(alphas), len(rhos))``.
    """
    x = _counts(counts)
    alphas = np.asarray(alphas, dtype=float)
    rhos = np.asarray(rhos, dtype=float)
    u1 = rng.uniform(n_draws)
    u2 = rng.uniform(n_draws)
    surface = np.empty((alphas.size, rhos.size))
    vals, cnt = np.unique(x, return_counts=True)
    for i, al in enumerate(alphas):
        v = np.pi * u2
        q = 1.0 / al - 1.0
        log_s = np.log(np.sin(al * v)) + q * np.log(np.sin((1 - al) * v)) - np.log(np.sin(v)) / al - q * np.log(-np.log(u1))
        for j, rho in enumerate(rhos):
            log_th = math.log(rho) - al * log_s
            if per_unit:
                lt = log_th[None, :] - (vals[:, None] + 1.0) * np.logaddexp(0.0, log_th)[None, :]
                per = logsumexp(lt, axis=1) - math.log(n_draws)
                surface[i, j] = float(per @ cnt)
            else:
                lt = _log_marg_terms(log_th, x.size, float(x.sum()))
                surface[i, j] = float(logsumexp(lt) - math.log(n_draws))
    i, j = np.unravel_index(int(np.argmax(surface)), surface.shape)
    return (float(alphas[i]), float(rhos[j])), surface


@dataclass
class GridSpec:
    """Equally spaced ``(alpha, rho)`` grid for the hyperparameter step."""

    alpha_lo: float = 0.01
    alpha_hi: float = 0.99
    n_alpha: int = 200
    rho_lo: float = 0.005
    rho_hi: float = 3.0
    n_rho: int = 150

    def __post_init__(self):
        if not (0 < self.alpha_lo < self.alpha_hi < 1):
            raise DomainError("alpha grid must lie inside (0, 1)")
        if not (0 < self.rho_lo < self.rho_hi):
            raise DomainError("rho grid must be positive")
        if self.n_alpha < 2 or self.n_rho < 2:
            raise DomainError("grid needs at least two points per axis")

    @property
    def alphas(self) -> np.ndarray:
        return np.linspace(self.alpha_lo, self.alpha_hi, self.n_alpha)

    @property
    def rhos(self) -> np.ndarray:
        return np.linspace(self.rho_lo, self.rho_hi, self.n_rho)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"alo:ahi:na x rlo:rhi:nr"``."""
        try:
            a, r = text.lower().replace(" ", "").split("x")
            alo, ahi, na = a.split(":")
            rlo, rhi, nr = r.split(":")
            return cls(float(alo), float(ahi), int(na), float(rlo), float(rhi), int(nr))
        except ValueError as exc:
            raise DomainError(f"cannot parse grid {text!r}; expected alo:ahi:n x rlo:rhi:n") from exc


@dataclass
class HyperPosterior:
    """Grid, last-iteration weights and the sampled ``(alpha, rho)`` path."""

    alphas: np.ndarray
    rhos: np.ndarray
    weights: np.ndarray
    draws: np.ndarray = field(repr=False)


class _ISTable:
    """``log IS(alpha, 1)`` tabulated on a shared log-t grid, one row per alpha."""

    def __init__(self, alphas, lo=-16.0, hi=7.0, step=0.01):
        self.u0, self.step = lo, step
        self.u = np.arange(lo, hi + step / 2, step)
        t = np.exp(self.u)
        rows = [inverse_stable_logpdf(ISPrior(float(a), 1.0), t, rtol=np.inf) for a in alphas]
        self.table = np.maximum(np.vstack(rows), -1e300)

    def lookup(self, log_t):
        """Interpolated log densities, shape (n_alpha, len(log_t))."""
        pos = (np.clip(log_t, self.u[0], self.u[-1]) - self.u0) / self.step
        i = np.minimum(pos.astype(int), self.u.size - 2)
        f = pos - i
        out = (1.0 - f) * self.table[:, i] + f * self.table[:, i + 1]
        # beyond the right edge the density has already collapsed
        return np.where(log_t > self.u[-1], -np.inf, out)


def gibbs_quine(
    counts,
    grid: Optional[GridSpec] = None,
    iters: int = 13000,
    burn_in: int = 3000,
    rng: Optional[RngStream] = None,
    init_theta: Optional[float] = None,
):
    """Three-block Gibbs sampler for pooled counts with a grid hyperprior.

    Model: ``X_j | lambda ~ Poisson(lambda)``, ``lambda | theta ~ Exp(theta)``,
    ``theta | alpha, rho ~ IS(alpha, rho)``, and
    ``(alpha, rho) ~ h(alpha) g_{sqrt(alpha)}(rho)`` with ``h = 1`` and
    ``g`` the positive-stable density. The blocks are

    * ``lambda | theta, w ~ Gamma(w + 1, rate n + theta)``,
    * ``theta | lambda`` by accept-reject with kernel ``theta exp(-lambda theta)``,
    * ``(alpha, rho) | theta`` drawn from grid weights
      ``IS_{alpha,rho}(theta) g_{sqrt(alpha)}(rho)``.

    Returns
    -------
    chain : GibbsChain
    hyper : HyperPosterior
    """
    _iters(iters, burn_in)
    grid = grid or GridSpec()
    rng = rng or RngStream(0)
    x = _counts(counts)
    w, n = float(x.sum()), x.size
    alphas, rhos = grid.alphas, grid.rhos
    log_rho = np.log(rhos)
    # hyperprior is fixed: evaluate once
    log_hyper = np.vstack([stable_logpdf(math.sqrt(a), rhos, rtol=np.inf) for a in alphas])
    table = _ISTable(alphas)
    gen = rng.generator
    lam = np.empty(iters)
    th = np.empty(iters)
    hyp = np.empty((iters, 2))
    ia, ir = alphas.size // 2, rhos.size // 2
    theta = init_theta if init_theta is not None else ISPrior(alphas[ia], rhos[ir]).mean
    for it in range(iters):
        lam_i = gen.gamma(w + 1.0, 1.0 / (n + theta))
        theta = _theta_step(lam_i, 1.0, ISPrior(alphas[ia], rhos[ir]), rng)
        # IS_{alpha,rho}(theta) = IS_{alpha,1}(theta/rho) / rho
        lw = table.lookup(math.log(theta) - log_rho) - log_rho[None, :] + log_hyper
        top = lw.max()
        if not np.isfinite(top):
            raise NumericError("all hyperparameter grid weights underflowed")
        p = np.exp(lw - top).ravel()
        cdf = np.cumsum(p)
        k = int(np.searchsorted(cdf, gen.random() * cdf[-1], side="right"))
        k = min(k, cdf.size - 1)
        ia, ir = divmod(k, rhos.size)
        lam[it], th[it] = lam_i, theta
        hyp[it] = alphas[ia], rhos[ir]
    weights = (p / p.sum()).reshape(alphas.size, rhos.size)
    chain = GibbsChain(lam, th, hyp, burn_in)
    return chain, HyperPosterior(alphas, rhos, weights, hyp[burn_in:])
