"""Command-line front end.

Subcommands: ``fit``, ``simulate-table2``, ``shrink-bench``, ``predictive``,
``quine``, ``ml-eval`` and ``plot-data``. Numeric output uses a fixed number of
significant digits (``--digits``, default 6) and a ``.`` decimal point, so
identical invocations produce identical bytes.

Exit codes: 0 success, 2 usage error, 3 data / domain error, 4 numeric
failure. Failures print a one-line JSON record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .bench import (
    MAD_NORMAL_SCALE,
    Table2Config,
    default_table2_rows,
    hpd_interval,
    run_table2,
    run_table3,
)
from .errors import DomainError, NumericError
from .expfamily import FAMILIES, ModelSpec, sufficient_stats
from .hierarchical import GridSpec, gibbs_quine, kappa_prior_pdf
from .posterior import (
    HeavyTailSpec,
    PosteriorSpec,
    bayes_estimate_mc,
    heavy_tail_adjust,
    posterior_moment,
    posterior_sample_ar,
)
from .predictive import (
    PredictiveSpec,
    posterior_predictive_pdf,
    prior_predictive_moment,
    prior_predictive_pdf,
)
from .rng import ISPrior, RngStream
from .special import GMLArgs, gml, gml_mc, gml_series, inverse_stable_pdf

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
SEED_ENV = "ISPRIOR_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail(EXIT_USAGE, "UsageError", message)


def _fail(code: int, kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": str(message)}) + "\n")
    raise SystemExit(code)


# ---------------------------------------------------------------------------
# formatting and I/O


class _Fmt:
    def __init__(self, digits: int):
        self.digits = digits

    def num(self, v) -> str:
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{self.digits}g}"

    def tree(self, obj):
        """Round every float in a JSON-able structure to ``digits`` significant digits."""
        if isinstance(obj, dict):
            return {k: self.tree(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [self.tree(v) for v in obj]
        if isinstance(obj, (float, np.floating)):
            v = float(obj)
            return v if not math.isfinite(v) else float(self.num(v))
        if isinstance(obj, np.integer):
            return int(obj)
        return obj


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj, fmt: _Fmt) -> str:
    return json.dumps(fmt.tree(obj), indent=2, allow_nan=True) + "\n"


def _csv(header: Sequence[str], rows, fmt: _Fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt.num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def read_column(path: str) -> np.ndarray:
    """Read a single numeric column from a CSV file; a non-numeric first line is a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    vals = []
    for i, r in enumerate(rows):
        cells = [c for c in r if c.strip()]
        if len(cells) != 1:
            raise DomainError(f"{path}: line {i + 1} does not hold exactly one value")
        try:
            vals.append(float(cells[0]))
        except ValueError as exc:
            raise DomainError(f"{path}: {cells[0]!r} is not a number") from exc
    if not vals:
        raise DomainError(f"{path} holds no data")
    return np.asarray(vals)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse number list {text!r}") from exc


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise DomainError(f"cannot parse grid {text!r}; expected lo:hi:steps") from exc
    if n < 2 or not hi > lo:
        raise DomainError("grid needs hi > lo and at least 2 steps")
    return np.linspace(lo, hi, n)


def _model(args) -> ModelSpec:
    return ModelSpec(args.model, args.nuisance)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise DomainError(f"{SEED_ENV}={env!r} is not an integer") from exc


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit(args, fmt):
    model = _model(args)
    data = read_column(args.data)
    stats = sufficient_stats(model, data)
    prior = ISPrior(args.alpha, args.rho)
    if args.heavy_tail is not None:
        stats = heavy_tail_adjust(stats, HeavyTailSpec(args.alpha, args.heavy_tail))
        prior = ISPrior(args.alpha, 1.0)
    spec = PosteriorSpec(stats, prior)
    rng = RngStream(_seed(args), args.stream)
    m1 = posterior_moment(spec, 1.0)
    m2 = posterior_moment(spec, 2.0)
    mc = bayes_estimate_mc(spec, 1.0, args.draws, rng.child(2 * args.stream))
    ar = posterior_sample_ar(spec, args.draws, rng.child(2 * args.stream + 1))
    lo, hi = hpd_interval(ar.draws, args.level) if ar.draws.size >= 100 else (math.nan, math.nan)
    res = {
        "model": model.family,
        "n": stats.n,
        "a": stats.a,
        "b": stats.b,
        "alpha": prior.alpha,
        "rho": prior.rho,
        "heavy_tail_alpha_prime": args.heavy_tail,
        "posterior_mean": m1,
        "posterior_variance": max(m2 - m1 * m1, 0.0),
        "theta1": mc.estimate,
        "theta1_std_error": mc.std_error,
        "theta1_variance": mc.variance,
        "theta1_ess": mc.ess,
        "theta2": ar.mean,
        "theta2_std_error": ar.std_error,
        "acceptance_rate": ar.acceptance_rate,
        "proposals_used": ar.proposals_used,
        "hpd_level": args.level,
        "hpd": [lo, hi],
        "seed": rng.seed,
    }
    _emit(_json(res, fmt), args.out)


def cmd_table2(args, fmt):
    rows = default_table2_rows(args.gen_exp_sigma)
    if args.rows != "all":
        want = [r.strip() for r in args.rows.split(",")]
        known = {r.label for r in rows}
        for w in want:
            if w not in known:
                raise DomainError(f"unknown row {w!r}; choose from {sorted(known)}")
        rows = [r for r in rows if r.label in want]
    cfg = Table2Config(
        rows=rows,
        sample_sizes=tuple(int(v) for v in _floats(args.n)),
        replications=args.reps,
        posterior_draws=args.draws,
        mad_scale=args.mad_scale,
        mad_about_truth=args.mad_about_truth,
    )
    table = run_table2(cfg, RngStream(_seed(args)))
    header = ["row", "n", "method", "mean", "mad", "reps", "failures"]
    _emit(_csv(header, ([r[k] for k in header] for r in table), fmt), args.out)


def cmd_table3(args, fmt):
    cases = [c.strip() for c in args.cases.split(",") if c.strip()]
    rep = run_table3(cases, args.reps, RngStream(_seed(args)), n_draws=args.draws)
    header = ["case", "method", "l1", "l2", "l1_se", "l2_se", "low_ess"]
    _emit(_csv(header, ([r[k] for k in header] for r in rep.rows()), fmt), args.out)


def cmd_predictive(args, fmt):
    model = _model(args)
    prior = ISPrior(args.alpha, args.rho)
    grid = _grid(args.grid)
    if args.data:
        stats = sufficient_stats(model, read_column(args.data))
        spec = PredictiveSpec(model, prior, stats)
        dens = posterior_predictive_pdf(spec, grid)
    else:
        spec = PredictiveSpec(model, prior)
        dens = prior_predictive_pdf(spec, grid)
    rows = [(float(g), float(d)) for g, d in zip(grid, dens)]
    _emit(_csv(["a_star", "density"], rows, fmt), args.out)
    if args.moments:
        if args.data:
            raise DomainError("moments are available for the prior predictive only")
        mom = {f"{k:g}": prior_predictive_moment(spec, k) for k in _floats(args.moments)}
        text = _json({"moments": mom}, fmt)
        if args.moments_out:
            _emit(text, args.moments_out)
        else:
            sys.stderr.write(text)


def cmd_quine(args, fmt):
    counts = read_column(args.data)
    grid = GridSpec.parse(args.grid)
    rng = RngStream(_seed(args))
    chain, hyper = gibbs_quine(counts, grid, args.iters, args.burnin, rng)
    rows = (
        (i, float(l), float(t), float(a), float(r))
        for i, (l, t, (a, r)) in enumerate(zip(chain.lambda_draws, chain.theta_draws, chain.hyper_draws))
    )
    _emit(_csv(["iter", "lambda", "theta", "alpha", "rho"], rows, fmt), args.out)
    summ = {}
    for name, v in (
        ("lambda", chain.kept("lambda")),
        ("theta_inverse", 1.0 / chain.kept("theta")),
        ("alpha", chain.kept("alpha")),
        ("rho", chain.kept("rho")),
    ):
        summ[name] = {"mean": float(np.mean(v)), "hpd95": list(hpd_interval(v, 0.95))}
    summ["iters"], summ["burn_in"], summ["n"] = args.iters, args.burnin, int(counts.size)
    text = _json(summ, fmt)
    if args.summary:
        _emit(text, args.summary)
    else:
        sys.stderr.write(text)


def cmd_ml_eval(args, fmt):
    direct = [args.eta, args.nu, args.tau, args.w]
    via_prior = [args.alpha, args.rho, args.omega, args.a]
    if all(v is not None for v in direct) and all(v is None for v in via_prior):
        gargs = GMLArgs(args.eta, args.nu, args.tau, args.w)
        est = gml_series(gargs) if args.method == "series" else gml(*direct)
        res = {"args": dict(eta=args.eta, nu=args.nu, tau=args.tau, w=args.w)}
    elif all(v is not None for v in via_prior) and all(v is None for v in direct):
        prior = ISPrior(args.alpha, args.rho)
        al, om, x = args.alpha, args.omega, args.a * args.rho
        if args.method == "mc":
            est = gml_mc(prior, om, args.a, args.draws, RngStream(_seed(args)))
        elif args.method == "series":
            est = gml_series(GMLArgs(al, al * om + 1.0, om + 1.0, -x))
        else:
            est = gml(al, al * om + 1.0, om + 1.0, -x)
        res = {"args": dict(eta=al, nu=al * om + 1.0, tau=om + 1.0, w=-x)}
    else:
        raise DomainError("give either --eta --nu --tau --w or --alpha --rho --omega --a")
    res.update(value=est.value, log_value=est.log_value, std_error=est.std_error, method=est.method, n_draws=est.n_draws)
    _emit(_json(res, fmt), args.out)


def _prior_density(prior: ISPrior, theta):
    # the density is finite at 0 with limit 1 / (rho Gamma(1 - alpha))
    out = np.empty(theta.size)
    zero = theta == 0
    if np.any(theta < 0):
        raise DomainError("theta grid must be nonnegative")
    out[zero] = math.exp(-math.log(prior.rho) - gammaln(1.0 - prior.alpha))
    out[~zero] = inverse_stable_pdf(prior, theta[~zero]) if np.any(~zero) else []
    return out


def _kappa_density(alpha, k):
    out = np.empty(k.size)
    if np.any((k < 0) | (k > 1)):
        raise DomainError("kappa grid must lie in [0, 1]")
    inner = (k > 0) & (k < 1)
    out[k == 0] = math.exp(-gammaln(1.0 - alpha))
    out[k == 1] = 0.0  # super-exponential decay of IS as theta -> infinity
    out[inner] = kappa_prior_pdf(alpha, k[inner]) if np.any(inner) else []
    return out


def cmd_plot_data(args, fmt):
    alphas = _floats(args.alpha)
    if args.what == "prior":
        grid = _grid(args.grid or "0:5:500")
        cols = [_prior_density(ISPrior(a, args.rho), grid) for a in alphas]
        header = ["theta"] + [f"alpha={a:g}" for a in alphas]
    else:
        grid = _grid(args.grid or "0:1:201")
        cols = [_kappa_density(a, grid) for a in alphas]
        header = ["kappa"] + [f"alpha={a:g}" for a in alphas]
    rows = ([float(g)] + [float(c[i]) for c in cols] for i, g in enumerate(grid))
    _emit(_csv(header, rows, fmt), args.out)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="isprior", description="Bayesian inference with the inverse stable prior.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"root seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--digits", type=int, default=6, help="significant digits in output")
    common.add_argument("--out", default=None, help="output file (default stdout)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp):
        sp.add_argument("--model", required=True, choices=sorted(FAMILIES))
        sp.add_argument("--nuisance", type=float, default=None, help="known shape / rate / mean where required")

    f = sub.add_parser("fit", parents=[common], help="posterior summaries for one data set")
    model_flags(f)
    f.add_argument("--data", required=True)
    f.add_argument("--alpha", type=float, required=True)
    f.add_argument("--rho", type=float, default=1.0)
    f.add_argument("--heavy-tail", type=float, default=None, metavar="ALPHA_PRIME")
    f.add_argument("--draws", type=int, default=10000)
    f.add_argument("--level", type=float, default=0.95)
    f.add_argument("--stream", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    t2 = sub.add_parser("simulate-table2", parents=[common], help="estimator accuracy study")
    t2.add_argument("--rows", default="all")
    t2.add_argument("--reps", type=int, default=1000)
    t2.add_argument("--n", default="15,30,60")
    t2.add_argument("--draws", type=int, default=500)
    t2.add_argument("--mad-scale", type=float, default=MAD_NORMAL_SCALE)
    t2.add_argument("--mad-about-truth", action="store_true")
    t2.add_argument("--gen-exp-sigma", type=float, default=1.0)
    t2.set_defaults(func=cmd_table2)

    t3 = sub.add_parser("shrink-bench", parents=[common], help="shrinkage risk study")
    t3.add_argument("--cases", default="I,II,III,IV,V")
    t3.add_argument("--reps", type=int, default=1000)
    t3.add_argument("--draws", type=int, default=50000)
    t3.set_defaults(func=cmd_table3)

    pr = sub.add_parser("predictive", parents=[common], help="prior / posterior predictive density")
    model_flags(pr)
    pr.add_argument("--alpha", type=float, required=True)
    pr.add_argument("--rho", type=float, default=1.0)
    pr.add_argument("--data", default=None)
    pr.add_argument("--grid", default="0:5:101")
    pr.add_argument("--moments", default=None, help="comma-separated moment orders (prior predictive)")
    pr.add_argument("--moments-out", default=None)
    pr.set_defaults(func=cmd_predictive)

    q = sub.add_parser("quine", parents=[common], help="three-block Gibbs sampler for pooled counts")
    q.add_argument("--data", required=True)
    q.add_argument("--grid", default="0.01:0.99:200x0.005:3:150")
    q.add_argument("--iters", type=int, default=13000)
    q.add_argument("--burnin", type=int, default=3000)
    q.add_argument("--summary", default=None, help="JSON summary path (default stderr)")
    q.set_defaults(func=cmd_quine)

    m = sub.add_parser("ml-eval", parents=[common], help="generalized Mittag-Leffler evaluation")
    for name in ("eta", "nu", "tau", "w", "alpha", "rho", "omega", "a"):
        m.add_argument(f"--{name}", type=float, default=None)
    m.add_argument("--method", choices=["auto", "series", "mc"], default="auto")
    m.add_argument("--draws", type=int, default=100000)
    m.set_defaults(func=cmd_ml_eval)

    pd = sub.add_parser("plot-data", parents=[common], help="density curves for plotting")
    pd.add_argument("what", choices=["prior", "kappa"])
    pd.add_argument("--alpha", required=True, help="comma-separated alphas")
    pd.add_argument("--rho", type=float, default=1.0)
    pd.add_argument("--grid", default=None, help="lo:hi:steps")
    pd.set_defaults(func=cmd_plot_data)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = _Fmt(args.digits)
    try:
        if args.digits < 1:
            raise DomainError("--digits must be positive")
        args.func(args, fmt)
    except DomainError as exc:
        _fail(EXIT_DATA, type(exc).__name__, str(exc))
    except (NumericError, FloatingPointError, OverflowError) as exc:
        _fail(EXIT_NUMERIC, type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
