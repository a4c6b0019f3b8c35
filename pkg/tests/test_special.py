import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.special import erfc, gammaln

from isprior.errors import DomainError, NumericError, RegimeError
from isprior.rng import ISPrior, RngStream, sample_inverse_stable
from isprior.special import (
    GMLArgs,
    gml,
    gml_is_grid,
    gml_mc,
    gml_quad,
    gml_series,
    inverse_stable_logpdf,
    inverse_stable_pdf,
    is_tail_approx,
    mittag_leffler,
    stable_logpdf,
    stable_pdf,
    tail_constants,
)

from helpers import within_se


def levy(s):
    return np.exp(-1.0 / (4 * s)) / (2 * math.sqrt(math.pi) * s**1.5)


# --- stable density -------------------------------------------------------


def test_levy_point():
    assert stable_pdf(0.5, 1.0) == pytest.approx(0.219696, abs=1e-6)


def test_levy_closed_form_across_range():
    s = np.logspace(-3, 3, 61)
    assert np.allclose(stable_pdf(0.5, s), levy(s), rtol=1e-9, atol=1e-14)


def _zolotarev_oracle(alpha, s):
    # direct quadrature of the Kanter form over (0, pi)
    q = alpha / (1 - alpha)

    def a_fn(p):
        return (np.sin(alpha * p) / np.sin(p)) ** q * np.sin((1 - alpha) * p) / np.sin(p)

    c = s ** (-q)
    val, _ = integrate.quad(lambda p: c * a_fn(p) * np.exp(-c * a_fn(p)), 0, np.pi, limit=500, epsabs=0, epsrel=1e-11)
    return q / (math.pi * s) * val


@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.7, 0.95])
@pytest.mark.parametrize("s", [0.01, 0.3, 1.0, 5.0])
def test_stable_against_direct_quadrature(alpha, s):
    ref = _zolotarev_oracle(alpha, s)
    assert stable_pdf(alpha, s) == pytest.approx(ref, rel=1e-7, abs=1e-8)


@pytest.mark.parametrize("alpha", [0.1, 0.3, 0.5, 0.8, 0.95])
def test_stable_integrates_to_one(alpha):
    u = np.linspace(-40, 100, 14001)
    f = stable_pdf(alpha, np.exp(u)) * np.exp(u)
    # the tail beyond e^100 is s^-alpha / Gamma(1 - alpha) to leading order
    tail = math.exp(-alpha * u[-1]) / math.gamma(1 - alpha)
    assert integrate.trapezoid(f, u) + tail == pytest.approx(1.0, abs=1e-6)


def test_stable_laplace_transform_quadrature():
    u = np.linspace(-40, 10, 20001)
    s = np.exp(u)
    v = integrate.trapezoid(np.exp(-s) * stable_pdf(0.5, s) * s, u)
    assert v == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_stable_rejects_nonpositive():
    with pytest.raises(DomainError):
        stable_pdf(0.5, 0.0)


def test_stable_log_tail_is_finite():
    v = stable_logpdf(0.3, np.array([1e-8, 1e8]))
    assert np.all(np.isfinite(v))


@given(st.floats(0.05, 0.95), st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_stable_nonnegative(alpha, s):
    assert stable_pdf(alpha, s) >= 0.0


# --- inverse stable density -----------------------------------------------


def test_inverse_stable_half_normal_case():
    # IS(1/2, 1) is half-normal with density exp(-t^2/4)/sqrt(pi)
    t = np.linspace(0.01, 12, 200)
    assert np.allclose(inverse_stable_pdf(ISPrior(0.5, 1.0), t), np.exp(-t * t / 4) / math.sqrt(math.pi), rtol=1e-9)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("rho", [1.0, 4.0])
def test_inverse_stable_integrates_to_one(alpha, rho):
    u = np.linspace(-30, 8, 12001) + math.log(rho)
    t = np.exp(u)
    assert integrate.trapezoid(inverse_stable_pdf(ISPrior(alpha, rho), t) * t, u) == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("alpha,rho", [(0.3, 1.0), (0.5, 2.0), (0.8, 0.5)])
def test_inverse_stable_limit_at_zero(alpha, rho):
    lim = 1.0 / (rho * math.gamma(1 - alpha))
    assert inverse_stable_pdf(ISPrior(alpha, rho), 1e-6) == pytest.approx(lim, rel=0.01)


def test_inverse_stable_histogram_matches_draws():
    prior = ISPrior(0.6, 1.0)
    th = sample_inverse_stable(prior, RngStream(99), 10**6)
    edges = np.quantile(th, np.linspace(0, 1, 51))
    edges[0], edges[-1] = 1e-12, th.max() * 2
    obs, _ = np.histogram(th, edges)
    u = np.linspace(-28, math.log(edges[-1]), 40001)
    t = np.exp(u)
    cdf = integrate.cumulative_trapezoid(inverse_stable_pdf(prior, t) * t, u, initial=0)
    p = np.diff(np.interp(edges, t, cdf))
    p /= p.sum()
    chi2 = np.sum((obs - th.size * p) ** 2 / (th.size * p))
    assert stats.chi2.sf(chi2, 49) > 0.001


def test_inverse_stable_rejects_nonpositive():
    with pytest.raises(DomainError):
        inverse_stable_pdf(ISPrior(0.5), -1.0)


# --- tail approximation -----------------------------------------------------


def test_tail_constants_half():
    c1, c2 = tail_constants(0.5)
    assert c1 == pytest.approx(1 / math.sqrt(math.pi))
    assert c2 == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_tail_ratio_tends_to_one(alpha):
    th = np.array([2.0, 4.0, 8.0])
    c1, c2 = tail_constants(alpha)
    log_approx = math.log(c1) + (alpha - 0.5) / (1 - alpha) * np.log(th) - c2 * th ** (1 / (1 - alpha))
    assert np.allclose(np.log(is_tail_approx(alpha, th[:1])), log_approx[:1])
    ratio = np.exp(inverse_stable_logpdf(ISPrior(alpha, 1.0), th / alpha, rtol=np.inf) - log_approx)
    assert abs(ratio[-1] - 1) < 0.1
    assert abs(ratio[-1] - 1) <= abs(ratio[0] - 1) + 1e-12


# --- generalized Mittag-Leffler ---------------------------------------------


def test_series_exponential():
    assert gml_series(GMLArgs(1, 1, 1, 1.5)).value == pytest.approx(math.exp(1.5), rel=1e-13)


@pytest.mark.parametrize("nu", [0.5, 1.0, 3.7])
def test_series_at_zero(nu):
    est = gml_series(GMLArgs(0.7, nu, 2.0, 0.0))
    assert est.value == pytest.approx(1 / math.gamma(nu))
    assert est.std_error == 0.0 and est.method == "series"


def test_series_degenerate_alpha_one():
    assert gml_series(GMLArgs(1, 4, 4, -2)).value == pytest.approx(math.exp(-2) / 6, rel=1e-12)


def test_series_classical_half():
    # E_{1/2}(-1) = e erfc(1)
    assert mittag_leffler(0.5, -1.0) == pytest.approx(math.e * erfc(1.0), rel=1e-12)


def test_series_value_frozen():
    # mpmath, 30 digits
    assert gml_series(GMLArgs(0.9, 5.5, 6, -2)).value == pytest.approx(0.0014983774580891923, rel=1e-11)


def test_series_regime_guard():
    with pytest.raises(RegimeError):
        gml_series(GMLArgs(0.5, 1, 1, -31))
    with pytest.raises(RegimeError):
        gml_series(GMLArgs(0.5, 1, 51, -1))


def test_series_cancellation_guard():
    with pytest.raises(NumericError):
        gml_series(GMLArgs(0.3, 1.0, 1.0, -29.0))


@pytest.mark.parametrize("alpha,omega,x", [(0.3, 0.0, 25.0), (0.5, 4.0, 2.0), (0.8, 10.0, 40.0), (0.95, 2.5, 7.0)])
def test_quadrature_matches_series_or_closed_form(alpha, omega, x):
    q = gml_quad(alpha, omega, x)
    try:
        ref = gml_series(GMLArgs(alpha, alpha * omega + 1, omega + 1, -x)).log_value
    except NumericError:
        # adaptive quadrature in theta against the density, a different rule and variable
        prior = ISPrior(alpha, 1.0)
        mode = (omega + 1) / x
        f = lambda t: t**omega * math.exp(-x * t) * float(inverse_stable_pdf(prior, t)) if t > 0 else 0.0
        hi = max(60 * mode, 10.0)
        pts = sorted({mode / 4, mode, 4 * mode, 0.5, 0.8, 1.0, 1.2, 1.5, 2.0, 3.0} - {hi})
        val = integrate.quad(f, 0, hi, points=[q for q in pts if q < hi], limit=1000, epsabs=0, epsrel=1e-13)[0]
        ref = math.log(val) - gammaln(omega + 1)
    assert q.log_value == pytest.approx(ref, abs=1e-9)


def test_quadrature_half_normal_closed_form_large_x():
    # mpmath quadrature against the half-normal form of IS(1/2, 1), x = 60, omega = 3
    assert gml_quad(0.5, 3.0, 60.0).log_value == pytest.approx(-16.9511310211982, abs=1e-9)


def test_grid_matches_pointwise():
    x = np.array([0.0, 0.3, 2.0, 11.0, 45.0])
    grid = gml_is_grid(0.4, 1.5, x)
    point = [gml(0.4, 0.4 * 1.5 + 1, 2.5, -v).log_value for v in x]
    assert np.allclose(grid, point, atol=1e-8)


def test_dispatcher_falls_back_to_quadrature():
    est = gml(0.3, 1.0, 1.0, -29.0)
    assert est.method == "quadrature" and 0 < est.value < 1


def test_dispatcher_outside_family_raises():
    with pytest.raises(NumericError):
        gml(0.3, 2.0, 1.0, -29.0)


@pytest.mark.parametrize("a,b", [(1, 1), (3, 5)])
def test_near_one_alpha_limit(a, b):
    al = 0.995
    v = math.gamma(b + 1) * gml(al, al * b + 1, b + 1, -a).value / math.exp(-a)
    assert abs(v - 1) < 0.02


@pytest.mark.parametrize("eta,tau", [(0.6, 1.0), (0.5, 2.0), (0.3, 3.0), (0.85, 6.0)])
def test_gml_bounded_and_increasing(eta, tau):
    nu = eta * (tau - 1) + 1
    w = np.linspace(-40, -0.01, 40)
    vals = np.array([gml(eta, nu, tau, wi).value for wi in w])
    assert np.all(vals > 0) and np.all(vals <= 1 / math.gamma(nu) + 1e-15)
    assert np.all(np.diff(vals) > 0)


def test_mc_at_zero_argument(rng):
    est = gml_mc(ISPrior(0.5, 1.0), 2.0, 0.0, 10**5, rng)
    assert within_se(est.value, 1 / math.gamma(2.0), est.std_error)
    assert est.method == "monte_carlo" and est.n_draws == 10**5


def test_mc_against_series_alpha_half(rng):
    est = gml_mc(ISPrior(0.5, 1.0), 0.0, 1.0, 10**5, rng)
    assert within_se(est.value, gml_series(GMLArgs(0.5, 1, 1, -1)).value, est.std_error)


def test_mc_against_series_alpha_09(rng):
    est = gml_mc(ISPrior(0.9, 1.0), 5.0, 2.0, 10**6, rng)
    assert within_se(est.value, 0.0014983774580891923, est.std_error)


def test_mc_rejects_zero_draws(rng):
    with pytest.raises(DomainError):
        gml_mc(ISPrior(0.5), 0.0, 1.0, 0, rng)


def test_gml_args_validation():
    with pytest.raises(DomainError):
        GMLArgs(0.0, 1.0, 1.0, -1.0)
