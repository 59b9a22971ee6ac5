"""Command-line interface.

Verdict-producing commands exit 0 on accept, 2 on reject, 3 on
inaccurate-information; any usage or input error exits 1.
"""

from __future__ import annotations

import json
import sys

import click

from .bench import ExperimentConfig, emit_report, emit_sweep, run_trials, sweep_alpha
from .domain import DomainError, JointSampler, Rng, load_distribution, marginal
from .hard_instances import gen_hard_2d, poissonized_counts, validity_check
from .testers import (
    Outcome,
    TesterConfig,
    Verdict,
    amplify,
    aug_independence_2d,
    aug_independence_3d,
    aug_independence_d,
    test_independence_by_learning,
)

_EXIT_CODES = {Outcome.ACCEPT: 0, Outcome.REJECT: 2, Outcome.INACCURATE: 3}


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


def _finish(verdict: Verdict, seed: int) -> None:
    click.echo(json.dumps(verdict.to_json(seed=seed)))
    sys.exit(_EXIT_CODES[verdict.outcome])


def _run_tester(runner, dist_path, pred_path, alpha, eps, delta, seed, profile) -> None:
    try:
        dist = load_distribution(dist_path)
        pred = load_distribution(pred_path)
        cfg = TesterConfig(eps=eps, alpha=alpha, profile=profile)
        sampler = JointSampler(dist)
        rng = Rng(seed)

        def run(r: Rng) -> Verdict:
            return runner(sampler, pred, cfg, r)

        if delta is not None and delta < 0.1:
            verdict = amplify(run, delta, rng)
        else:
            verdict = run(rng)
    except (DomainError, OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(str(exc))
    _finish(verdict, seed)


def _tester_options(fn):
    for opt in reversed(
        [
            click.option("--dist", "dist_path", required=True, type=click.Path(exists=True)),
            click.option("--pred", "pred_path", required=True, type=click.Path(exists=True)),
            click.option("--alpha", required=True, type=float, help="claimed tv accuracy of --pred"),
            click.option("--eps", required=True, type=float, help="farness proximity"),
            click.option("--delta", type=float, default=None, help="target failure prob; < 0.1 amplifies"),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option(
                "--profile",
                type=click.Choice(["theory", "practical"]),
                default="practical",
                show_default=True,
            ),
        ]
    ):
        fn = opt(fn)
    return fn


@click.group()
def main() -> None:
    """Prediction-assisted independence testing of discrete distributions."""


@main.command("test2d")
@_tester_options
def test2d(dist_path, pred_path, alpha, eps, delta, seed, profile):
    """Test a two-axis distribution for independence."""
    _run_tester(aug_independence_2d, dist_path, pred_path, alpha, eps, delta, seed, profile)


@main.command("test3d")
@_tester_options
def test3d(dist_path, pred_path, alpha, eps, delta, seed, profile):
    """Test a three-axis distribution for independence."""
    _run_tester(aug_independence_3d, dist_path, pred_path, alpha, eps, delta, seed, profile)


@main.command("testd")
@_tester_options
def testd(dist_path, pred_path, alpha, eps, delta, seed, profile):
    """Test a distribution of any arity for full independence."""
    _run_tester(aug_independence_d, dist_path, pred_path, alpha, eps, delta, seed, profile)


@main.command("learn")
@click.option("--dist", "dist_path", required=True, type=click.Path(exists=True))
@click.option("--eps", required=True, type=float)
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--axes", default=None, help="comma-separated axis subset, e.g. 0,2")
def learn(dist_path, eps, delta, seed, axes):
    """Learning-based independence test (no prediction needed)."""
    try:
        dist = load_distribution(dist_path)
        if axes is not None:
            subset = [int(a) for a in axes.split(",") if a != ""]
            dist = marginal(dist, subset)
        verdict = test_independence_by_learning(JointSampler(dist), eps, delta, Rng(seed))
    except (DomainError, OSError, json.JSONDecodeError, ValueError) as exc:
        _fail(str(exc))
    _finish(verdict, seed)


@main.command("gen-hard")
@click.option("--n", required=True, type=int)
@click.option("--m", required=True, type=int)
@click.option("--k", required=True, type=int)
@click.option("--alpha", required=True, type=float)
@click.option("--eps", required=True, type=float)
@click.option("--force-x", type=click.IntRange(0, 1), default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--eps-meas", type=float, default=None, help="expert override for the sign magnitude")
@click.option("--alpha-meas", type=float, default=None, help="expert override for the heavy-row rate")
def gen_hard(n, m, k, alpha, eps, force_x, seed, out, eps_meas, alpha_meas):
    """Generate one hidden-bit hard instance with its validity report."""
    try:
        rng = Rng(seed)
        inst = gen_hard_2d(
            n, m, k, alpha, eps, rng.split(0),
            force_x=force_x, eps_meas=eps_meas, alpha_meas=alpha_meas,
        )
        counts = poissonized_counts(inst, rng.split(1))
        report = validity_check(inst, counts)
        payload = {
            "instance": {"dims": list(inst.p.dims), "probs": [float(v) for v in inst.p.probs]},
            "meta": inst.meta(seed=seed),
            "validity": report.as_dict(),
        }
        with open(out, "w") as fh:
            json.dump(payload, fh)
    except (DomainError, OSError, ValueError) as exc:
        _fail(str(exc))
    click.echo(json.dumps({"valid": report.valid, "x": inst.x, "out": out}))


@main.command("bench")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--jobs", type=int, default=None, help="overrides the config's jobs")
def bench(config_path, out_path, jobs):
    """Run a trial batch from a JSON config; write the per-trial CSV."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        if jobs is not None:
            cfg.jobs = jobs
        records = run_trials(cfg)
        summary = emit_report(records, out_path)
    except (DomainError, OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(summary))


@main.command("sweep-alpha")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--alphas", required=True, help="comma-separated claimed-accuracy levels")
@click.option("--out", "out_path", required=True, type=click.Path())
def sweep_alpha_cmd(config_path, alphas, out_path):
    """Rerun one config across claimed-accuracy levels; write the sweep CSV."""
    try:
        cfg = ExperimentConfig.from_file(config_path)
        levels = [float(a) for a in alphas.split(",") if a != ""]
        if not levels:
            raise DomainError("no alpha levels given")
        rows = sweep_alpha(cfg, levels)
        emit_sweep(rows, out_path)
    except (DomainError, OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        _fail(str(exc))
    click.echo(json.dumps(rows))


if __name__ == "__main__":
    main()
