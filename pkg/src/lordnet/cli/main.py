"""
Main CLI entry point for lordnet-lab.
"""

import click

from .. import __version__
from .common import setup_logging
from .data import gen, render, solve
from .model import evaluate_command, experiments, gradcheck, train


@click.group()
@click.version_option(version=__version__, prog_name="lordnet-lab")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def lordnet(verbose):
    """
    lordnet-lab - Physics-constrained Lord networks and finite-difference references for Poisson and Navier-Stokes.
    """
    setup_logging(verbose)


# Add subcommands
lordnet.add_command(gen, name="gen")
lordnet.add_command(solve, name="solve")
lordnet.add_command(train, name="train")
lordnet.add_command(evaluate_command, name="eval")
lordnet.add_command(gradcheck, name="gradcheck")
lordnet.add_command(render, name="render")
lordnet.add_command(experiments, name="experiments")


if __name__ == '__main__':
    lordnet()
