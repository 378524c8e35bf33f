"""Command-line interface.

Subcommands: bound, calibrate, embed, exact, rl, best-of-m, sweep,
compare-bounds. Exit codes: 0 success, 2 infeasible input, 3 coverage or
parse error, 4 budget exhausted or training did not converge.
"""

from __future__ import annotations

import csv
import json
import sys
from contextlib import contextmanager

import click
import numpy as np

from . import harness
from .detector import (
    KeyedHashScore,
    ThresholdDetector,
    calibrate as calibrate_scores,
    load_scores,
    score_quantiles,
)
from .distribution import FiniteDistribution, ingest_csv
from .divergence import (
    ErrorRates,
    bound_for,
    compare_bounds as bounds_cmp,
)
from .errors import ConvergenceError, TworateError
from .optimal import build_plan, optimal_distribution
from .policy import RewardSpec, TrainConfig, export_policy, train
from .sampler import BestOfMConfig, RejectionSampler, best_of_m_exact_law, best_of_m_sample_positions


def fmt(x) -> str:
    """Shortest round-trip float formatting; keeps outputs byte-stable."""
    if x is None:
        return ""
    return repr(float(x))


@contextmanager
def _out_stream(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            yield fp


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _load_data(data, has_header, dedupe, delimiter):
    return ingest_csv(data, has_header=has_header, dedupe=dedupe, delimiter=delimiter)


def _score_fn(scores, key, support):
    if scores is not None:
        return load_scores(scores, support)
    return KeyedHashScore(key.encode("utf-8"))


data_options = [
    click.option("--header/--no-header", "has_header", default=False,
                 help="Treat the first data row as a header."),
    click.option("--dedupe/--no-dedupe", default=False,
                 help="Aggregate identical rows instead of one state per row."),
    click.option("--delimiter", default=",", show_default=True),
    click.option("--scores", type=click.Path(exists=True), default=None,
                 help="External score file (state_id,score or payload_sha256,score)."),
    click.option("--key", default="0", show_default=True,
                 help="Key for the built-in keyed-hash scorer."),
]


def with_data_options(fn):
    for opt in reversed(data_options):
        fn = opt(fn)
    return fn


@click.group()
def cli():
    """Tight fidelity-detectability bounds and optimal watermark generation."""


@cli.command("bound")
@click.option("--alpha", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--div", "divergence", default="kl", show_default=True,
              type=click.Choice(["kl", "tv", "chi2"]))
@click.option("--out", default=None)
def cmd_bound(alpha, beta, divergence, out):
    """Print the fidelity floor for given error rates."""
    rates = ErrorRates(alpha, beta)
    value = bound_for(divergence, rates)
    with _out_stream(out) as fp:
        fp.write(f"bound {fmt(value)}\n")
        if divergence == "kl" and 0.0 < beta and alpha + beta < 1.0:
            cmp = bounds_cmp(rates)
            fp.write(f"g1 {fmt(cmp.g1)}\n")
            fp.write(f"margin {fmt(cmp.margin)}\n")


@cli.command("calibrate")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("--taus", required=True, help="Comma-separated thresholds.")
@click.option("--out", default=None)
@click.option("--format", "fmt_kind", default="csv", type=click.Choice(["csv", "json"]))
def cmd_calibrate(data, has_header, dedupe, delimiter, scores, key, taus, out, fmt_kind):
    """Achieved false-positive rate per threshold."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    records = calibrate_scores(F, score, _floats(taus))
    with _out_stream(out) as fp:
        if fmt_kind == "json":
            json.dump(
                [{"tau": r.tau, "alpha": r.achieved_alpha} for r in records],
                fp, indent=2)
            fp.write("\n")
        else:
            fp.write("tau,alpha\n")
            for r in records:
                fp.write(f"{fmt(r.tau)},{fmt(r.achieved_alpha)}\n")


@cli.command("embed")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("--tau", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("-n", "n_samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None, help="Sample stream CSV.")
@click.option("--stats-out", default=None, help="Sampler stats JSON.")
def cmd_embed(data, has_header, dedupe, delimiter, scores, key, tau, beta,
              n_samples, seed, out, stats_out):
    """Draw watermarked samples via two-rate acceptance sampling."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    plan = build_plan(F, ThresholdDetector(score, tau), beta)
    sampler = RejectionSampler(plan)
    rng = np.random.default_rng(seed)
    pos = sampler.sample_positions(n_samples, rng)
    with _out_stream(out) as fp:
        w = csv.writer(fp)
        for p in pos:
            s = F.states[int(p)]
            w.writerow([s.id, *s.cells()])
    with _out_stream(stats_out) as fp:
        json.dump(sampler.stats.to_json_obj(), fp, indent=2)
        fp.write("\n")


@cli.command("exact")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("--tau", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--out", default=None)
def cmd_exact(data, has_header, dedupe, delimiter, scores, key, tau, beta, out):
    """Export the plan and the exact optimal watermarked distribution."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    plan = build_plan(F, ThresholdDetector(score, tau), beta)
    g = optimal_distribution(plan)
    with _out_stream(out) as fp:
        json.dump(
            {"plan": plan.to_json_obj(), "distribution": g.to_json_obj()},
            fp, indent=2)
        fp.write("\n")


@cli.command("rl")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("--tau", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--lr", type=float, default=0.5, show_default=True)
@click.option("--max-iters", type=int, default=5000, show_default=True)
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--out", default=None)
def cmd_rl(data, has_header, dedupe, delimiter, scores, key, tau, beta,
           lr, max_iters, tol, out):
    """Train the tabular softmax policy toward the optimal distribution."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    try:
        plan = build_plan(F, ThresholdDetector(score, tau), beta)
        reward = RewardSpec.for_plan(plan)
    except TworateError as exc:
        if beta in (0.0, 1.0):
            raise type(exc)(f"{exc}; use `tworate embed` for beta = 0") from None
        raise
    pi, report = train(F, reward, TrainConfig(lr, max_iters, tol))
    with _out_stream(out) as fp:
        export_policy(pi, report, fp)
    if not report.converged:
        raise ConvergenceError(
            f"training did not converge within {max_iters} iterations"
        )


@cli.command("best-of-m")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("-m", "m", type=int, default=4, show_default=True)
@click.option("-n", "n_samples", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--law", is_flag=True, help="Emit the exact law instead of samples.")
@click.option("--out", default=None)
def cmd_best_of_m(data, has_header, dedupe, delimiter, scores, key, m,
                  n_samples, seed, law, out):
    """Best-of-m baseline: keep the highest-scoring of m base draws."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    cfg = BestOfMConfig(m, score)
    with _out_stream(out) as fp:
        if law:
            best_of_m_exact_law(F, cfg).dump_json(fp)
        else:
            rng = np.random.default_rng(seed)
            pos = best_of_m_sample_positions(F, cfg, n_samples, rng)
            w = csv.writer(fp)
            for p in pos:
                s = F.states[int(p)]
                w.writerow([s.id, *s.cells()])


DEFAULT_TAU_QUANTILES = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
DEFAULT_BETAS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)

SWEEP_COLUMNS = (
    "tau", "beta", "alpha", "beta_achieved",
    "empirical_divergence", "bound", "gap", "allowance", "feasible", "error",
)


@cli.command("sweep")
@click.argument("data", type=click.Path(exists=True))
@with_data_options
@click.option("--taus", default=None,
              help="Comma-separated thresholds; default: score quantiles "
                   f"{DEFAULT_TAU_QUANTILES}.")
@click.option("--betas", default=",".join(str(b) for b in DEFAULT_BETAS),
              show_default=True)
@click.option("--generator", default="exact", show_default=True,
              type=click.Choice(list(harness.GENERATOR_KINDS)))
@click.option("-m", "m", type=int, default=4, show_default=True)
@click.option("-n", "n_samples", type=int, default=100_000, show_default=True)
@click.option("--div", "divergence", default="kl", show_default=True,
              type=click.Choice(["kl", "tv", "chi2"]))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt_kind", default="csv", type=click.Choice(["csv", "json"]))
@click.option("--plot", default=None, help="Also render a figure to this path.")
def cmd_sweep(data, has_header, dedupe, delimiter, scores, key, taus, betas,
              generator, m, n_samples, divergence, seed, out, fmt_kind, plot):
    """Grid sweep comparing empirical divergence to the theoretical floor."""
    F = _load_data(data, has_header, dedupe, delimiter)
    score = _score_fn(scores, key, F)
    if taus:
        tau_list = _floats(taus)
    else:
        tau_list = score_quantiles(F, score, DEFAULT_TAU_QUANTILES)
    cfg = harness.SweepConfig(
        taus=tuple(tau_list),
        betas=tuple(_floats(betas)),
        n_samples=n_samples,
        seed=seed,
        divergence=divergence,
        generator_kind=generator,
        m=m,
    )
    records = harness.run_sweep(F, score, cfg)
    with _out_stream(out) as fp:
        if fmt_kind == "json":
            json.dump({"config": _sweep_meta(cfg, dedupe),
                       "records": [_record_obj(r) for r in records]}, fp, indent=2)
            fp.write("\n")
        else:
            for k, v in _sweep_meta(cfg, dedupe).items():
                fp.write(f"# {k}={v}\n")
            fp.write(",".join(SWEEP_COLUMNS) + "\n")
            for r in records:
                fp.write(_record_csv(r) + "\n")
    if plot:
        from .figures import render_sweep

        render_sweep(records, plot)


def _sweep_meta(cfg: harness.SweepConfig, dedupe: bool) -> dict:
    return {
        "generator": cfg.generator_kind,
        "divergence": cfg.divergence,
        "n_samples": cfg.n_samples,
        "seed": cfg.seed,
        "m": cfg.m,
        "dedupe": dedupe,
        "taus": ",".join(fmt(t) for t in cfg.taus),
        "betas": ",".join(fmt(b) for b in cfg.betas),
    }


def _record_obj(r: harness.SweepRecord) -> dict:
    return {
        "tau": r.tau, "beta": r.beta, "alpha": r.alpha,
        "beta_achieved": r.beta_achieved,
        "empirical_divergence": r.empirical_divergence,
        "bound": r.bound, "gap": r.gap, "allowance": r.allowance,
        "feasible": r.feasible, "error": r.error,
    }


def _record_csv(r: harness.SweepRecord) -> str:
    cells = [
        fmt(r.tau), fmt(r.beta), fmt(r.alpha), fmt(r.beta_achieved),
        fmt(r.empirical_divergence), fmt(r.bound), fmt(r.gap),
        fmt(r.allowance), str(int(r.feasible)), r.error.replace(",", ";"),
    ]
    return ",".join(cells)


@cli.command("compare-bounds")
@click.option("--alphas", default="0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45",
              show_default=True)
@click.option("--betas", default="0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45",
              show_default=True)
@click.option("--out", default=None)
@click.option("--format", "fmt_kind", default="csv", type=click.Choice(["csv", "json"]))
@click.option("--plot", default=None, help="Also render a figure to this path.")
def cmd_compare_bounds(alphas, betas, out, fmt_kind, plot):
    """Tight KL floor vs the earlier bound g1 on a rate grid."""
    rows = harness.comparison_grid(_floats(alphas), _floats(betas))
    with _out_stream(out) as fp:
        if fmt_kind == "json":
            json.dump([r.__dict__ for r in rows], fp, indent=2)
            fp.write("\n")
        else:
            fp.write("alpha,beta,g1,g2,margin\n")
            for r in rows:
                fp.write(
                    f"{fmt(r.alpha)},{fmt(r.beta)},{fmt(r.g1)},"
                    f"{fmt(r.g2)},{fmt(r.margin)}\n"
                )
    if plot:
        from .figures import render_comparison

        render_comparison(rows, plot)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except TworateError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
