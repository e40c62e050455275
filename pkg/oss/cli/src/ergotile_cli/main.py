"""ergotile CLI: run experiments from YAML configs and emit their tables."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import typer

from ergotile.config import load_config
from ergotile.exceptions import ConfigError, ErgotileError, InvariantViolation, ValidationError
from ergotile.experiments import ExperimentRegistry, describe as describe_experiment, run_experiment

app = typer.Typer(name="ergotile", help="Desk-scale experiments for bilinear operators and ergodic averages")

EXIT_INVARIANT = 1
EXIT_CONFIG = 2


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


# ------------------------------------------------------------------
# run
# ------------------------------------------------------------------


@app.command()
def run(
    config_path: Path = typer.Argument(..., help="Experiment config (YAML)"),
    output_dir: Optional[Path] = typer.Option(None, "--output-dir", "-o", help="Override output_dir from the config"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level"),
) -> None:
    """Run one experiment and write its CSV table and text summary."""
    _configure_logging(verbose)
    try:
        config = load_config(config_path)
        artifacts = run_experiment(config, output_dir)
    except InvariantViolation as exc:
        typer.echo(f"Invariant violated: {exc}", err=True)
        raise typer.Exit(code=EXIT_INVARIANT)
    except ConfigError as exc:
        typer.echo(f"Config error: {exc}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    except ErgotileError as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    typer.echo(str(artifacts.table))
    typer.echo(str(artifacts.summary))


# ------------------------------------------------------------------
# validate
# ------------------------------------------------------------------


@app.command()
def validate(
    config_path: Path = typer.Argument(..., help="Experiment config (YAML)"),
) -> None:
    """Check a config against the schema and the tile-system constraints."""
    try:
        config = load_config(config_path)
        ExperimentRegistry.default().get(config.kind)
    except ValidationError as exc:
        typer.echo(f"Config error: {len(exc.errors)} schema violation(s) in {config_path}", err=True)
        for line in exc.errors:
            typer.echo(f"  - {line}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    except ConfigError as exc:
        typer.echo(f"Config error: {exc}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    typer.echo(f"ok: {config.kind} (profile {config.profile}, seed {config.seed})")


# ------------------------------------------------------------------
# list-experiments / describe
# ------------------------------------------------------------------


@app.command(name="list-experiments")
def list_experiments() -> None:
    """List every experiment kind with its targets."""
    for experiment in ExperimentRegistry.default().list_all():
        typer.echo(f"{experiment.name:<20} {experiment.targets}")


@app.command()
def describe(
    kind: str = typer.Argument(..., help="Experiment kind"),
) -> None:
    """Describe an experiment kind and its params."""
    try:
        typer.echo(describe_experiment(kind))
    except ConfigError as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)


if __name__ == "__main__":
    app()
