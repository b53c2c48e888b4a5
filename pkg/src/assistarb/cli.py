"""Operator entry points: generate environments, run the evaluation
suite, and serve the interactive playground."""

from __future__ import annotations

import os
import sys
import time
from pathlib import Path

import click

from .arbiter import load_arbiter_config, validate_config
from .environment import GenerationConfig, generate_environment, load_environment
from .estimation import default_config_for
from .evaluation import (
    MarginPolicy,
    SamplerSettings,
    combine_results,
    evaluate_environment,
    write_confusion_csv,
    write_report,
)


@click.group()
def main():
    """Uncertainty-driven arbitration of human assistance: benchmark
    generation, ground-truth evaluation, and the live playground."""


def _positive(ctx, param, value):
    if value is not None and value < 1:
        raise click.BadParameter("must be >= 1")
    return value


@main.command("gen-env")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Base seed; file i uses seed+i.")
@click.option("--count", type=int, default=1, show_default=True, callback=_positive,
              help="Number of environment files to write.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="envs",
              show_default=True)
@click.option("--horizon-total", type=int, default=600, show_default=True)
@click.option("--tail-repeat", type=int, default=100, show_default=True)
def cmd_gen_env(seed, count, out_dir, horizon_total, tail_repeat):
    """Write deterministic benchmark environment files."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise click.ClickException(f"cannot create {out}: {exc}")
    config = GenerationConfig(horizon_total=horizon_total, tail_repeat=tail_repeat)
    for i in range(count):
        env = generate_environment(seed + i, config)
        path = out / f"env-{seed + i:04d}.json"
        env.save(path)
        click.echo(f"wrote {path}")


@main.command("eval")
@click.argument("envs", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Arbiter config JSON; default derives ranges per environment.")
@click.option("--n-test", type=int, default=100, show_default=True)
@click.option("--margin", type=int, default=None,
              help="Transition margin in steps [default: estimate horizon].")
@click.option("--p-collapse", type=float, default=0.0, show_default=True)
@click.option("--baseline/--no-baseline", default=False, show_default=True,
              help="Also score the variance-gated teleoperation baseline.")
@click.option("--gamma", type=float, default=0.3, show_default=True)
@click.option("--n-rollouts", type=int, default=50, show_default=True)
@click.option("--pred-horizon", type=int, default=64, show_default=True)
@click.option("--est-horizon", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None, help="[default: cpu count]")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="report",
              show_default=True)
def cmd_eval(envs, config_path, n_test, margin, p_collapse, baseline, gamma,
             n_rollouts, pred_horizon, est_horizon, seed, workers, out_dir):
    """Evaluate estimation accuracy against ground truth per environment."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or os.cpu_count() or 1
    sampler = SamplerSettings(n_r=n_rollouts, horizon=pred_horizon, p_collapse=p_collapse)
    margin_policy = MarginPolicy(margin) if margin is not None else None

    results = []
    for env_path in envs:
        env = load_environment(env_path)
        if config_path is not None:
            config = load_arbiter_config(config_path)
        else:
            config = default_config_for(env, horizon=est_horizon)
        report = validate_config(config)
        if not report.ok:
            raise click.ClickException(f"invalid arbiter config: {report.describe()}")
        tic = time.perf_counter()
        result = evaluate_environment(
            env, n_test=n_test, config=config, sampler=sampler,
            margin=margin_policy, baseline_gamma=(gamma if baseline else None),
            seed=seed, workers=workers,
        )
        elapsed = time.perf_counter() - tic
        results.append(result)
        write_confusion_csv(result.confusion_raw, out / f"confusion_raw_env{env.seed:04d}.csv")
        write_confusion_csv(result.confusion_filtered, out / f"confusion_filtered_env{env.seed:04d}.csv")
        diag = result.confusion_filtered.diagonal()
        click.echo(
            f"{env_path}: {elapsed:.0f}s  filtered diag "
            f"none={diag['none']:.3f} corr={diag['corrections']:.3f} "
            f"tele={diag['teleoperation']:.3f}  detection={result.detection_rate:.2f}"
        )

    report = combine_results(results)
    write_report(report, out / "report.json")
    click.echo(f"wrote {out / 'report.json'}")


@main.command("serve")
@click.option("--env", "env_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--bind", default="127.0.0.1:8080", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--rate", type=float, default=10.0, show_default=True,
              help="Control rate in Hz; 0 means lockstep (one step per client message).")
@click.option("--log-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--ui-dir", type=click.Path(file_okay=False), default=None,
              help="Built browser client assets [default: ./frontend/dist if present].")
def cmd_serve(env_path, config_path, bind, seed, rate, log_dir, ui_dir):
    """Run the interactive playground service."""
    from .server import serve_playground
    from .session import SessionConfig

    env = load_environment(env_path)
    if config_path is not None:
        arbiter = load_arbiter_config(config_path)
    else:
        arbiter = default_config_for(env)
    report = validate_config(arbiter)
    if not report.ok:
        click.echo(f"refusing to start: {report.describe()}", err=True)
        sys.exit(1)
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    session_config = SessionConfig(arbiter=arbiter, seed=seed, control_rate_hz=rate)
    click.echo(f"playground at http://{bind}/  (WebSocket endpoint ws://{bind}/ws)")
    serve_playground(bind, env, session_config, log_dir=log_dir, ui_dir=ui_dir)


if __name__ == "__main__":
    main()
