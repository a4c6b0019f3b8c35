import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.special import hyp1f1

from isprior.errors import DegeneracyWarning, DomainError
from isprior.hierarchical import (
    GridSpec,
    gibbs_normal_normal,
    gibbs_poisson_exponential,
    gibbs_quine,
    grid_mle_hyper,
    kappa_prior_pdf,
    marginal_lik_hyper,
    marginal_prior_kernel,
    poisson_unequal_rates,
    shrinkage_global_invbeta,
    shrinkage_global_is,
    shrinkage_local_is,
)
from isprior.rng import ISPrior, RngStream, sample_inverse_stable
from isprior.special import gml


def half_normal_is(t):
    # IS(1/2, 1)
    return np.exp(-t * t / 4) / math.sqrt(math.pi)


# --- marginal prior ---------------------------------------------------------


def test_marginal_kernel_at_zero():
    assert marginal_prior_kernel(0.0, 0.5, ISPrior(0.4, 2.0)) == pytest.approx(1 / math.gamma(0.4 * 0.5 + 1))


def test_marginal_kernel_poisson_exponential():
    lam = np.array([0.5, 2.0])
    k = marginal_prior_kernel(lam, 1.0, ISPrior(0.6, 1.5))
    assert np.allclose(k, [gml(0.6, 1.6, 2.0, -1.5 * v).value for v in lam])


def test_marginal_kernel_is_mixture():
    # E[theta**b exp(-g theta)] = Gamma(b+1) rho^b E^{b+1}(-g rho)
    g, b = 0.8, 0.5
    val = integrate.quad(lambda t: t**b * math.exp(-g * t) * half_normal_is(t), 0, np.inf)[0]
    assert math.gamma(b + 1) * marginal_prior_kernel(g, b, ISPrior(0.5, 1.0)) == pytest.approx(val, rel=1e-8)


# --- Gibbs samplers ---------------------------------------------------------


def test_normal_normal_against_two_dim_quadrature():
    r = RngStream(31)
    x = r.generator.normal(1.0, 1.0, 10)
    n, xbar = x.size, float(x.mean())
    chain = gibbs_normal_normal(xbar, n, ISPrior(0.5, 1.0), 6000, 500, r)
    th = chain.kept("theta")
    chain_mean = float(np.mean(xbar / (1 + th / n)))

    def joint(lam, t):
        return math.exp(-n * (lam - xbar) ** 2 / 2 - lam * lam * t / 2) * math.sqrt(t) * half_normal_is(t)

    z = integrate.dblquad(joint, 0, 15, -3, 5)[0]
    m = integrate.dblquad(lambda lam, t: lam * joint(lam, t), 0, 15, -3, 5)[0]
    assert chain_mean == pytest.approx(m / z, rel=0.02)


def test_normal_normal_degenerate_prior():
    xbar, n = 0.7, 4
    chain = gibbs_normal_normal(xbar, n, ISPrior(0.99, 1.0), 20000, 500, RngStream(5))
    ref = stats.norm(n * xbar / (n + 1), 1 / math.sqrt(n + 1))
    assert stats.kstest(chain.kept("lambda"), ref.cdf).statistic < 0.02


def test_poisson_exponential_zero_counts():
    chain = gibbs_poisson_exponential([0] * 5, ISPrior(0.5, 1.0), 500, 100, RngStream(2))
    lam = chain.kept("lambda")
    assert lam.size == 400 and np.all(lam > 0) and np.all(np.isfinite(lam))


def test_poisson_exponential_degenerate_prior():
    counts = [3, 1, 4, 1, 5]
    chain = gibbs_poisson_exponential(counts, ISPrior(0.99, 1.0), 20000, 500, RngStream(6))
    ref = stats.gamma(sum(counts) + 1, scale=1 / (len(counts) + 1))
    assert stats.kstest(chain.kept("lambda"), ref.cdf).statistic < 0.02


def test_chain_validation():
    with pytest.raises(DomainError):
        gibbs_poisson_exponential([1, 2], ISPrior(0.5), 10, 10, RngStream(0))
    with pytest.raises(DomainError):
        gibbs_poisson_exponential([1, -2], ISPrior(0.5), 10, 2, RngStream(0))
    chain = gibbs_poisson_exponential([1, 2], ISPrior(0.5), 10, 2, RngStream(0))
    with pytest.raises(DomainError):
        chain.kept("alpha")


# --- Poisson unequal rates --------------------------------------------------


def _rates_oracle(counts):
    n, w = len(counts), sum(counts)

    def post(t):
        k = t / (1 + t)
        return k**n * (1 - k) ** w * half_normal_is(t)

    z = integrate.quad(post, 0, np.inf)[0]
    return integrate.quad(lambda t: post(t) / (1 + t), 0, np.inf)[0] / z


def test_rates_all_zero_counts():
    res = poisson_unequal_rates([0, 0, 0, 0], 0.5, 200000, RngStream(1))
    shrink = _rates_oracle([0, 0, 0, 0])
    assert np.all(res.posterior_means <= 1.0)
    assert res.posterior_means[0] == pytest.approx(shrink, rel=0.01)


def test_rates_against_quadrature():
    counts = [2, 5, 0, 1]
    res = poisson_unequal_rates(counts, 0.5, 200000, RngStream(2))
    assert np.allclose(res.posterior_means, (np.array(counts) + 1) * _rates_oracle(counts), rtol=0.01)


def test_rates_degenerate():
    counts = np.array([2, 0, 7])
    res = poisson_unequal_rates(counts, 0.99, 100000, RngStream(3))
    assert np.allclose(res.posterior_means, (counts + 1) / 2, rtol=0.03)
    assert 0 < res.ess <= 100000 and res.normalizer > 0


# --- global and local shrinkage --------------------------------------------


def test_global_zero_data():
    res = shrinkage_global_is(np.zeros(4), 0.5, 1000, RngStream(0))
    assert np.all(res.posterior_means == 0)


def test_global_single_observation_quadrature():
    x = 5.0

    def post(t):
        k = t / (1 + t)
        return math.sqrt(k) * math.exp(-k * x * x / 2) * half_normal_is(t)

    z = integrate.quad(post, 0, np.inf)[0]
    shrink = integrate.quad(lambda t: post(t) / (1 + t), 0, np.inf)[0] / z
    res = shrinkage_global_is([x], 0.5, 200000, RngStream(4))
    assert res.posterior_means[0] == pytest.approx(x * shrink, rel=0.01)


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=12), st.sampled_from([0.1, 0.5, 0.9]))
@settings(max_examples=25, deadline=None)
def test_global_pure_shrinkage(x, alpha):
    x = np.asarray(x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegeneracyWarning)
        res = shrinkage_global_is(x, alpha, 2000, RngStream(9))
    assert np.all(np.abs(res.posterior_means) <= np.abs(x) + 1e-12)
    assert np.all(np.sign(res.posterior_means) * np.sign(x) >= 0)


def test_global_large_norm_no_overflow():
    x = np.full(50, 12.0)
    res = shrinkage_global_is(x, 0.5, 20000, RngStream(1))
    assert np.isfinite(res.log_normalizer)
    assert np.all(np.isfinite(res.posterior_means))


def test_degeneracy_warning():
    with pytest.warns(DegeneracyWarning):
        shrinkage_global_is(np.full(9, 10.0), 0.99, 2000, RngStream(1))


def test_invbeta_zero_data():
    assert np.all(shrinkage_global_invbeta(np.zeros(3)).posterior_means == 0)


def test_invbeta_single_observation_quadrature():
    x = 2.0

    def post(d2):
        return d2**-0.5 * (1 + d2) ** -1.5 * math.exp(-x * x / (2 * (1 + d2)))

    z = integrate.quad(post, 0, 1)[0] + integrate.quad(post, 1, np.inf)[0]
    m = integrate.quad(lambda d: post(d) * d / (1 + d), 0, 1)[0] + integrate.quad(lambda d: post(d) * d / (1 + d), 1, np.inf)[0]
    assert shrinkage_global_invbeta([x]).posterior_means[0] == pytest.approx(x * m / z, rel=0.005)


@pytest.mark.parametrize("n,s", [(1, 4.0), (9, 9.0), (9, 900.0), (250, 600.0)])
def test_invbeta_confluent_form(n, s):
    a, b = (n + 1) / 2, 0.5
    k_mean = a / (a + b) * hyp1f1(a + 1, a + b + 1, -s / 2) / hyp1f1(a, a + b, -s / 2)
    x = np.full(n, math.sqrt(s / n))
    assert shrinkage_global_invbeta(x).kappa_mean == pytest.approx(k_mean, rel=1e-7)


def test_local_monotone_in_abs_x():
    grid = np.array([0.0, 0.5, 1.5, 3.0, 6.0])
    res = shrinkage_local_is(grid, 0.5, 200000, RngStream(8))
    assert np.all(np.diff(np.abs(res.posterior_means)) > 0)

    def shrink(x):
        post = lambda t: math.sqrt(t / (1 + t)) * math.exp(-t / (1 + t) * x * x / 2) * half_normal_is(t)
        return integrate.quad(lambda t: post(t) / (1 + t), 0, np.inf)[0] / integrate.quad(post, 0, np.inf)[0]

    assert np.allclose(res.posterior_means[1:], grid[1:] * [shrink(v) for v in grid[1:]], rtol=0.01)


def test_local_zero_and_degenerate():
    assert shrinkage_local_is([0.0], 0.5, 1000, RngStream(0)).posterior_means[0] == 0.0
    x = np.array([-1.0, 0.5, 2.0])
    res = shrinkage_local_is(x, 0.99, 100000, RngStream(1))
    assert np.allclose(res.posterior_means, x / 2, rtol=0.03)


# --- kappa density ------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 0.7, 0.95])
def test_kappa_integrates_to_one(alpha):
    k = np.linspace(1e-9, 1 - 1e-9, 200001)
    assert integrate.trapezoid(kappa_prior_pdf(alpha, k), k) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.2, 0.6])
def test_kappa_limit_at_zero(alpha):
    assert kappa_prior_pdf(alpha, 1e-7) == pytest.approx(1 / math.gamma(1 - alpha), rel=1e-5)


def test_kappa_mode_near_half():
    k = np.linspace(0.3, 0.7, 4001)
    assert abs(k[np.argmax(kappa_prior_pdf(0.99, k))] - 0.5) < 0.02


@given(st.floats(0.02, 0.98))
@settings(max_examples=20, deadline=None)
def test_kappa_bounded(alpha):
    v = kappa_prior_pdf(alpha, np.linspace(1e-6, 1 - 1e-6, 2001))
    assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_kappa_domain():
    with pytest.raises(DomainError):
        kappa_prior_pdf(0.5, 1.0)


# --- hyperparameters ----------------------------------------------------------


def test_marginal_likelihood_bounded():
    v = marginal_lik_hyper([0], 0.5, 1.0, 10000, RngStream(1))
    assert -np.inf < v < 0


def test_marginal_likelihood_degenerate():
    counts, th0 = [2, 4, 1], 0.8
    n, w = len(counts), sum(counts)
    expect = math.log(th0) + w * math.log(n) - (w + 1) * math.log(n + th0)
    v = marginal_lik_hyper(counts, 0.99, th0, 100000, RngStream(2))
    assert v == pytest.approx(expect, abs=0.02)


def _geometric_mixture_counts(n, seed):
    r = RngStream(seed)
    th = sample_inverse_stable(ISPrior(0.5, 1.0), r, n)
    return r.generator.poisson(r.generator.exponential(1 / th)), r.child(1)


def test_grid_mle_truth_in_likelihood_region():
    # alpha is weakly identified at n = 200, so check the profile likelihood
    x, r = _geometric_mixture_counts(200, 11)
    alphas = np.linspace(0.05, 0.95, 19)
    _, surf = grid_mle_hyper(x, alphas, np.linspace(0.2, 3, 29), 20000, r, per_unit=True)
    assert surf.shape == (19, 29) and np.all(np.isfinite(surf))
    profile = surf.max(axis=1)
    assert profile.max() - profile[9] < stats.chi2.ppf(0.95, 1) / 2


def test_grid_mle_recovers_alpha():
    x, r = _geometric_mixture_counts(2000, 11)
    (al, rho), _ = grid_mle_hyper(x, np.linspace(0.05, 0.95, 19), np.linspace(0.2, 3, 29), 20000, r, per_unit=True)
    assert abs(al - 0.5) <= 0.15 and abs(rho - 1.0) <= 0.3


def test_grid_spec_parse():
    g = GridSpec.parse("0.01:0.99:200x0.005:3:150")
    assert (g.n_alpha, g.n_rho) == (200, 150) and g.alphas[0] == 0.01 and g.rhos[-1] == 3.0
    with pytest.raises(DomainError):
        GridSpec.parse("nonsense")
    with pytest.raises(DomainError):
        GridSpec(0.0, 0.99)


def test_gibbs_quine_small():
    r = RngStream(3)
    counts = r.generator.poisson(r.generator.exponential(10.0, 60))
    grid = GridSpec(0.05, 0.95, 10, 0.05, 2.0, 8)
    chain, hyp = gibbs_quine(counts, grid, 300, 100, r)
    assert chain.lambda_draws.size == chain.theta_draws.size == chain.hyper_draws.shape[0] == 300
    assert hyp.weights.sum() == pytest.approx(1.0) and np.all(hyp.weights >= 0)
    assert set(np.unique(chain.kept("alpha"))) <= set(grid.alphas)
    assert abs(chain.kept("lambda").mean() - counts.mean()) < 4 * counts.std() / math.sqrt(counts.size) + 1
