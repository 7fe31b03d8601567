"""CLI interface using Typer."""

from pathlib import Path
from typing import NoReturn, Optional

import typer

from ..config import EXIT_CODES
from ..core.experiment_service import ExperimentService
from ..core.models import ext_str
from ..core.presets import PRESETS, get_preset
from ..errors import DivergenceError, ParseError
from .config_parser import ExperimentConfig, parse_config

app = typer.Typer(
    name="stochapprox",
    help="Stochastic approximation experiments with certified bounds",
    add_completion=False,
)

presets_app = typer.Typer(help="List and print shipped experiment presets")
app.add_typer(presets_app, name="presets")


def _fail(message: str, code: str) -> NoReturn:
    typer.echo(typer.style(f"Error: {message}", fg=typer.colors.RED), err=True)
    raise typer.Exit(EXIT_CODES[code])


def _load(config_path: Optional[Path], preset: Optional[str]) -> ExperimentConfig:
    if (config_path is None) == (preset is None):
        _fail("Give exactly one of --config and --preset", "config")
    try:
        if preset is not None:
            return parse_config(get_preset(preset))
        return parse_config(config_path.read_text(encoding="utf-8"))  # type: ignore[union-attr]
    except ParseError as exc:
        _fail(f"{config_path or preset}: {exc}", "config")
    except (OSError, ValueError) as exc:
        _fail(str(exc), "config")


CONFIG_OPTION = typer.Option(
    None,
    "-c",
    "--config",
    help="Experiment file",
    dir_okay=False,
)
PRESET_OPTION = typer.Option(None, "-p", "--preset", help="Shipped preset used instead of a file")


@app.command("run")
def run(
    config_path: Optional[Path] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
    out: Optional[Path] = typer.Option(
        None,
        "-o",
        "--out",
        help="Output directory (defaults to [output] directory)",
    ),
    seeds: Optional[int] = typer.Option(
        None,
        "--seeds",
        help="Run replicates 0..N-1 instead of the configured seeds",
        min=1,
    ),
    master_seed: Optional[int] = typer.Option(
        None,
        "--master-seed",
        help="Master seed overriding the configured one",
        min=0,
    ),
) -> None:
    """
    Run an experiment and write trajectory.csv, aggregate.csv and summary.txt.

    Exits with 1 on configuration errors, 2 on divergence and 3 when the
    aggregate curve exceeds its bound.
    """
    config = _load(config_path, preset)
    service = ExperimentService(config)
    typer.echo(f"Running: {config_path or preset}")
    typer.echo(f"Problem: {config.problem.kind}")
    typer.echo(f"Bound: {config.output.bound}")

    try:
        summary = service.run(
            out_dir=out,
            seeds=list(range(seeds)) if seeds is not None else None,
            master_seed=master_seed,
        )
    except DivergenceError as exc:
        _fail(str(exc), "divergence")
    except ValueError as exc:
        _fail(str(exc), "config")

    typer.echo("")
    for line in summary.lines():
        typer.echo(f"  {line}")
    if not summary.passed:
        message = f"Bound check failed at {summary.violations} horizons."
        typer.echo(typer.style(message, fg=typer.colors.YELLOW, bold=True))
        raise typer.Exit(EXIT_CODES["check"])
    typer.echo(typer.style("Experiment complete!", fg=typer.colors.GREEN, bold=True))


@app.command("check")
def check(
    config_path: Optional[Path] = CONFIG_OPTION,
    preset: Optional[str] = PRESET_OPTION,
) -> None:
    """Validate an experiment file and build its problem instance without running it."""
    config = _load(config_path, preset)
    try:
        setup = ExperimentService(config).setup()
    except ValueError as exc:
        _fail(str(exc), "config")

    rc = setup.rc
    typer.echo(f"Problem: {config.problem.kind} (dimension {setup.w0.size})")
    typer.echo(f"  rho: {rc.rho}")
    typer.echo(f"  L_V: {rc.L_V}")
    typer.echo(f"  tau: ({rc.tau0}, {rc.tau1})")
    typer.echo(f"  sigma2: ({rc.sigma2_0}, {rc.sigma2_1})")
    if setup.dc is not None:
        typer.echo(f"  gamma_max: {ext_str(setup.dc.gamma_max)}")
    typer.echo(typer.style("Configuration valid.", fg=typer.colors.GREEN, bold=True))


@presets_app.command("list")
def list_presets() -> None:
    """List shipped presets."""
    typer.echo("Available presets:")
    for name, (description, _) in PRESETS.items():
        typer.echo(f"  {name}: {description}")


@presets_app.command("show")
def show_preset(name: str = typer.Argument(..., help="Preset name")) -> None:
    """Print the experiment file of a preset."""
    try:
        text = get_preset(name)
    except ValueError as exc:
        _fail(str(exc), "config")
    typer.echo(text, nl=False)


def main() -> None:
    """Entry point for CLI."""
    app()


if __name__ == "__main__":
    main()
