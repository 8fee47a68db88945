"""
Shared options, logging setup and the exception-to-exit-code mapping for the CLI.
"""

import functools
import logging
import os
import sys

import click

from ..config import defaults
from ..config.run_config import RunConfig, load_run_config
from ..errors import AcceptanceError, ConfigError, LordnetError, NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def show_progress() -> bool:
    return sys.stderr.isatty()


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, AcceptanceError):
        return EXIT_ACCEPTANCE
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def handle_errors(command):
    """Report library errors on stderr and exit with their code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except LordnetError as error:
            click.echo(f"❌ {type(error).__name__}: {error}", err=True)
            if isinstance(error, AcceptanceError):
                for failure in error.failures:
                    click.echo(f"   {failure}", err=True)
            sys.exit(exit_code_for(error))

    return wrapper


config_option = click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False),
                             help="Path to the JSON run configuration")
seed_option = click.option("--seed", type=int, default=None, help="Override seeds.base")
jobs_option = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                           help="Worker processes for per-sample work")
force_option = click.option("--force", is_flag=True, help="Overwrite an existing output directory")


def load_config(config_path: str, seed) -> RunConfig:
    return load_run_config(config_path, seed)


def output_root(override) -> str:
    """--out, then LORDNET_OUT, then the default runs directory."""
    return override or os.environ.get(defaults.OUTPUT_ENV_VAR) or defaults.DEFAULT_OUTPUT_DIR


def refuse_existing(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise ConfigError("output exists; pass --force to overwrite", path)
