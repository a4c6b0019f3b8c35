"""Simulation studies: estimator accuracy for single-parameter models and
shrinkage risk for normal means, plus MAD and HPD helpers."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import BudgetError, DegeneracyWarning, DomainError
from .expfamily import ModelSpec, mle_closed_form, sample_data, sufficient_stats
from .hierarchical import MIN_ESS, shrinkage_global_invbeta, shrinkage_global_is
from .posterior import PosteriorSpec, bayes_estimate_mc, posterior_sample_ar
from .rng import ISPrior, RngStream

__all__ = [
    "mad",
    "hpd_interval",
    "Table2Row",
    "Table2Config",
    "default_table2_rows",
    "run_table2",
    "RiskReport",
    "generate_case",
    "run_table3",
    "TABLE3_ALPHAS",
    "MAD_NORMAL_SCALE",
]

MAD_NORMAL_SCALE = 1.4826
TABLE3_ALPHAS = (0.01, 0.5, 0.99)


def mad(values, scale: float = 1.0, center: Optional[float] = None) -> float:
    """Median absolute deviation ``scale * median(|v - center|)``.

    ``center`` defaults to the median of ``values``; ``scale=1.4826`` gives
    the normal-consistent version.

    Examples
    --------
    >>> mad([1, 2, 3, 4, 5])
    1.0
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("mad of an empty sequence")
    c = float(np.median(v)) if center is None else center
    return float(scale * np.median(np.abs(v - c)))


def hpd_interval(samples, level: float = 0.95) -> tuple:
    """Shortest interval holding ``ceil(level * N)`` of the sorted samples."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size < 100:
        raise DomainError("hpd_interval needs at least 100 samples")
    if not (0.0 < level < 1.0):
        raise DomainError("level must lie in (0, 1)")
    m = int(math.ceil(level * x.size))
    widths = x[m - 1 :] - x[: x.size - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


# ---------------------------------------------------------------------------
# single-parameter estimator study


@dataclass(frozen=True)
class Table2Row:
    label: str
    model: ModelSpec
    theta: float
    prior: ISPrior


def default_table2_rows(gen_exp_sigma: float = 1.0) -> list:
    """The five benchmark rows. The Rayleigh data are generated at
    ``theta = sqrt(pi/2)``, the half-normal at ``theta = pi/2``."""
    return [
        Table2Row("poisson", ModelSpec("poisson"), 4.0, ISPrior(0.4, 4.0)),
        Table2Row("rayleigh", ModelSpec("rayleigh"), math.sqrt(math.pi / 2), ISPrior(0.5, 1.0)),
        Table2Row("half_normal", ModelSpec("half_normal"), math.pi / 2, ISPrior(0.6, math.sqrt(2 / math.pi))),
        Table2Row(
            "generalized_exponential", ModelSpec("generalized_exponential", gen_exp_sigma), 2.0, ISPrior(0.8, 1.5)
        ),
        Table2Row("exponential", ModelSpec("exponential"), 1.0, ISPrior(0.95, 1.0)),
    ]


@dataclass
class Table2Config:
    rows: list = field(default_factory=default_table2_rows)
    sample_sizes: tuple = (15, 30, 60)
    replications: int = 1000
    posterior_draws: int = 500
    mad_scale: float = MAD_NORMAL_SCALE
    mad_about_truth: bool = False
    methods: tuple = ("theta1", "theta2", "mle")


def run_table2(config: Table2Config, rng: RngStream) -> list:
    """Replicate the estimator study.

    For each row and sample size, every replication simulates data, then
    computes the self-normalized estimate (``theta1``), the accept-reject
    draw mean (``theta2``) and the MLE. Replication ``r`` of cell ``c`` uses
    stream id ``c * replications + r`` of ``rng``'s seed, so cells can be run
    separately and still reproduce.

    Returns
    -------
    list of dict
        Keys ``row, n, method, mean, mad, reps, failures``.
    """
    out = []
    cell = 0
    for row in config.rows:
        for n in config.sample_sizes:
            est = {m: [] for m in config.methods}
            failures = {m: 0 for m in config.methods}
            for r in range(config.replications):
                s = rng.child(cell * config.replications + r)
                data = sample_data(row.model, row.theta, n, s)
                stats = sufficient_stats(row.model, data)
                spec = PosteriorSpec(stats, row.prior)
                if "theta1" in est:
                    est["theta1"].append(bayes_estimate_mc(spec, 1.0, config.posterior_draws, s).estimate)
                if "theta2" in est:
                    try:
                        est["theta2"].append(posterior_sample_ar(spec, config.posterior_draws, s).mean)
                    except BudgetError:
                        failures["theta2"] += 1
                if "mle" in est:
                    try:
                        est["mle"].append(mle_closed_form(row.model, data))
                    except DomainError:
                        failures["mle"] += 1
            cell += 1
            for m in config.methods:
                v = np.asarray(est[m])
                center = row.theta if config.mad_about_truth else None
                out.append(
                    dict(
                        row=row.label,
                        n=n,
                        method=m,
                        mean=float(v.mean()) if v.size else float("nan"),
                        mad=mad(v, config.mad_scale, center) if v.size else float("nan"),
                        reps=int(v.size),
                        failures=failures[m],
                    )
                )
    return out


# ---------------------------------------------------------------------------
# shrinkage risk study


@dataclass
class RiskReport:
    """Mean L1 and squared-L2 risks per case and method.

    ``l1[case][method]`` is the replication average of
    ``sum_i |lambda_i - lambda_hat_i|``; ``l2`` likewise with squares.
    ``l1_se`` / ``l2_se`` are their Monte Carlo standard errors and
    ``low_ess[case][method]`` counts replications whose importance weights
    had an effective sample size below ``MIN_ESS``.
    """

    replications: int
    l1: dict
    l2: dict
    l1_se: dict
    l2_se: dict
    low_ess: dict = field(default_factory=dict)

    def rows(self):
        for case in self.l1:
            for method in self.l1[case]:
                yield dict(
                    case=case,
                    method=method,
                    l1=self.l1[case][method],
                    l2=self.l2[case][method],
                    l1_se=self.l1_se[case][method],
                    l2_se=self.l2_se[case][method],
                    low_ess=self.low_ess.get(case, {}).get(method, 0),
                )


_CASES = ("I", "II", "III", "IV", "V")


def generate_case(case: str, rng: RngStream):
    """Draw ``(lambda, x)`` for one replication of a shrinkage case.

    * I: ``lambda_i ~ N(0, 1)``, ``x_i ~ N(lambda_i, 1)``, ``n = 9``.
    * II / III: three means ``~ N(0, 1)`` / ``N(0, 100)``, each shared by a
      block of three observations with unit noise.
    * IV / V: 250 means from ``0.1 t_2(scale 3) + 0.9 delta_0``, noise
      variance 1 / 1.5.

    ``lambda`` is returned per observation (block means repeated).
    """
    g = rng.generator
    if case == "I":
        lam = g.normal(0.0, 1.0, 9)
        return lam, g.normal(lam, 1.0)
    if case in ("II", "III"):
        sd = 1.0 if case == "II" else 10.0
        lam = np.repeat(g.normal(0.0, sd, 3), 3)
        return lam, g.normal(lam, 1.0)
    if case in ("IV", "V"):
        n = 250
        spike = g.random(n) >= 0.1
        lam = np.where(spike, 0.0, 3.0 * g.standard_t(2.0, n))
        noise_sd = 1.0 if case == "IV" else math.sqrt(1.5)
        return lam, g.normal(lam, noise_sd)
    raise DomainError(f"unknown case {case!r}; choose from {_CASES}")


def _se(v):
    return float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")


def run_table3(
    cases: Iterable[str],
    replications: int,
    rng: RngStream,
    alphas: Sequence[float] = TABLE3_ALPHAS,
    n_draws: int = 50_000,
) -> RiskReport:
    """Risk comparison of inverted-beta and inverse stable global shrinkage.

    Degenerate importance weights are counted in ``RiskReport.low_ess``
    rather than warned about once per replication.
    """
    cases = list(cases)
    if not cases:
        raise DomainError("no cases requested")
    if replications < 1:
        raise DomainError("replications must be positive")
    methods = ["inv_beta"] + [f"is_{a:g}" for a in alphas]
    l1, l2, l1_se, l2_se, low = {}, {}, {}, {}, {}
    for ci, case in enumerate(cases):
        if case not in _CASES:
            raise DomainError(f"unknown case {case!r}; choose from {_CASES}")
        r1 = {m: np.empty(replications) for m in methods}
        r2 = {m: np.empty(replications) for m in methods}
        low[case] = {m: 0 for m in methods}
        for r in range(replications):
            s = rng.child(ci * replications + r)
            lam, x = generate_case(case, s)
            fits = {"inv_beta": shrinkage_global_invbeta(x).posterior_means}
            for a, m in zip(alphas, methods[1:]):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", DegeneracyWarning)
                    res = shrinkage_global_is(x, a, n_draws, s)
                fits[m] = res.posterior_means
                low[case][m] += int(res.ess < MIN_ESS)
            for m, est in fits.items():
                d = np.abs(lam - est)
                r1[m][r] = d.sum()
                r2[m][r] = (d * d).sum()
        l1[case] = {m: float(r1[m].mean()) for m in methods}
        l2[case] = {m: float(r2[m].mean()) for m in methods}
        l1_se[case] = {m: _se(r1[m]) for m in methods}
        l2_se[case] = {m: _se(r2[m]) for m in methods}
    return RiskReport(replications, l1, l2, l1_se, l2_se, low)
