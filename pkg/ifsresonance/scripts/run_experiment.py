import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional, Tuple

import click
import numpy as np

from ifsresonance.config import COMMANDS, parse_config
from ifsresonance.errors import IFSResonanceError
from ifsresonance.experiments import Outcome, plan, run, write_csv
from ifsresonance.logger import configure_logging


# Helper function to serialize exact rationals and numpy scalars for JSON
def json_serializer(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"Object of type {obj.__class__.__name__} is not JSON serializable")


def emit(outcome: Outcome, out_path: Optional[Path]) -> None:
    if outcome.svg is not None:
        if out_path is None:
            click.echo(outcome.svg, nl=False)
        else:
            with open(str(out_path), "w+", encoding="utf-8") as f:
                f.write(outcome.svg)
    elif out_path is None:
        write_csv(outcome, sys.stdout)
    else:
        with open(str(out_path), "w+", encoding="utf-8", newline="") as f:
            write_csv(outcome, f)
    click.echo(json.dumps(outcome.summary, default=json_serializer, sort_keys=True), err=True)


def fail(error: IFSResonanceError) -> None:
    click.echo(json.dumps(error.to_record(), default=json_serializer), err=True)
    sys.exit(1)


def run_command(
    command: str,
    overrides: Tuple[str, ...],
    config: Optional[Path],
    out_path: Optional[Path],
    workers: Optional[int],
    dry_run: bool,
    mode: Optional[str],
    log_level: Optional[str],
) -> None:
    configure_logging(log_level)
    flags = [f"command={command}"]
    if workers is not None:
        flags.append(f"workers={workers}")
    if mode is not None:
        flags.append(f"mode={mode}")
    try:
        text = Path(config).read_text(encoding="utf-8") if config is not None else ""
        cfg = parse_config(text, (*overrides, *flags))
        if dry_run:
            click.echo(json.dumps(plan(cfg), default=json_serializer, sort_keys=True))
            return
        emit(run(cfg), out_path)
    except IFSResonanceError as e:
        fail(e)


def experiment_options(func: Callable) -> Callable:
    options = [
        click.argument("overrides", nargs=-1),
        click.option("--config", type=click.Path(exists=True), default=None,
                     help="TOML experiment file; key=value arguments override it"),
        click.option("--out_path", type=click.Path(exists=False), default=None,
                     help="Path to the output CSV or SVG file, defaults to stdout"),
        click.option("--workers", type=int, default=None,
                     help="Number of workers to use for parallel processing"),
        click.option("--dry_run", is_flag=True, default=False,
                     help="Print the planned work sizes without computing"),
        click.option("--mode", type=click.Choice(["exact", "float"]), default=None,
                     help="Numeric backend, exact rationals by default"),
        click.option("--log_level", type=str, default=None, help="Logging level, overrides IFSRES_LOG_LEVEL"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


@click.group(help="Box dimensions, resonance and projections of self-similar sets.")
def run_experiment_cli() -> None:
    pass


def _register(name: str) -> None:
    @run_experiment_cli.command(name=name, help=f"Run the `{name}` experiment.")
    @experiment_options
    def command(overrides: Tuple[str, ...], **kwargs: Any) -> None:
        run_command(name, overrides, **kwargs)


for _name in COMMANDS:
    _register(_name)
