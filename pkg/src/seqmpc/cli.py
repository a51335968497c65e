"""Command-line interface: single runs, parameter sweeps and verification.

Exit codes: 0 success, 1 configuration error, 2 simulation blow-up,
3 solver/verification error.
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import click

from .harness import (
    ConfigError,
    ScenarioConfig,
    compute_metrics,
    load_config,
    run_scenario,
    sweep,
    write_metrics_csv,
    write_spectrum_csv,
    write_sweep_csv,
)
from .plant import SimulationBlowUpError
from .solver import SolverError

EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_SOLVER = 3


def _load(config_path, **overrides) -> ScenarioConfig:
    cfg = load_config(config_path) if config_path else ScenarioConfig()
    clean = {k: v for k, v in overrides.items() if v is not None}
    try:
        return replace(cfg, **clean)
    except (TypeError, ConfigError) as exc:
        raise ConfigError(str(exc)) from exc


def _scalar_overrides(horizon, nk, nl, lam, mode, duration, seed, substeps):
    out = {}
    if horizon is not None:
        out["horizons"] = (horizon,)
    if nk is not None:
        out["n_ks"] = (nk,)
    if nl is not None:
        out["n_ls"] = (nl,)
    if lam is not None:
        out["lambdas"] = (lam,)
    if mode is not None:
        out["modes"] = (mode,)
    if duration is not None:
        out["duration"] = duration
    if seed is not None:
        out["seed"] = seed
    if substeps is not None:
        out["substeps"] = substeps
    return out


def _common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Scenario config file (INI-style key/value sections)."),
        click.option("--horizon", type=int, default=None, help="Prediction horizon."),
        click.option("--nk", type=int, default=None, help="Machine-side candidate count."),
        click.option("--nl", type=int, default=None, help="Grid-side candidate count."),
        click.option("--lambda", "lam", type=float, default=None, help="Switching-effort weight."),
        click.option("--mode", type=click.Choice(["sequential", "standard_sd"]), default=None),
        click.option("--duration", type=float, default=None, help="Simulated seconds."),
        click.option("--seed", type=int, default=None),
        click.option("--substeps", type=int, default=None, help="Plant sub-integrations per period."),
        click.option("--out", "out_dir", type=click.Path(), default="runs/latest",
                     help="Output directory for CSV files."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


@click.group()
def main():
    """Sequential multistep MPC simulator for an NPC back-to-back PMSG plant."""


@main.command()
@_common_options
def run(config_path, horizon, nk, nl, lam, mode, duration, seed, substeps, out_dir):
    """Simulate one scenario and write timeseries/metrics/spectrum CSV files."""
    try:
        cfg = _load(
            config_path,
            **_scalar_overrides(horizon, nk, nl, lam, mode, duration, seed, substeps),
        )
        ctrl = cfg.controller()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        series = run_scenario(cfg, ctrl)
    except SimulationBlowUpError as exc:
        click.echo(f"simulation blew up: {exc}", err=True)
        sys.exit(EXIT_BLOWUP)
    except SolverError as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(EXIT_SOLVER)
    try:
        metrics = compute_metrics(series, cfg)
    except ValueError as exc:
        # e.g. the run is shorter than the requested THD window
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series.write_csv(out / "timeseries.csv")
    write_metrics_csv(metrics, ctrl, out / "metrics.csv")
    write_spectrum_csv(series, cfg, out / "spectrum.csv")
    click.echo(f"{len(series)} steps -> {out}")
    for name in metrics.FIELDS:
        click.echo(f"  {name} = {getattr(metrics, name):.6g}")


@main.command(name="sweep")
@_common_options
def sweep_cmd(config_path, horizon, nk, nl, lam, mode, duration, seed, substeps, out_dir):
    """Run the controller-parameter grid and write one metrics row per cell."""
    try:
        cfg = _load(
            config_path,
            **_scalar_overrides(horizon, nk, nl, lam, mode, duration, seed, substeps),
        )
        rows = sweep(cfg)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out / "metrics.csv")
    failed = [r for r in rows if r["status"] != "ok"]
    click.echo(f"{len(rows)} configurations -> {out / 'metrics.csv'}"
               + (f" ({len(failed)} failed)" if failed else ""))


@main.command()
@click.option("--seed", type=int, default=0)
@click.option("--cases", type=int, default=25, help="Random cases per property.")
def verify(seed, cases):
    """Check the decoder and condensation against enumeration oracles."""
    from . import verify as verify_mod

    results = verify_mod.run_all(seed=seed, cases=cases)
    ok = True
    for name, passed, detail in results:
        status = "pass" if passed else "FAIL"
        click.echo(f"{status}  {name}: {detail}")
        ok = ok and passed
    if not ok:
        sys.exit(EXIT_SOLVER)


if __name__ == "__main__":
    main()
