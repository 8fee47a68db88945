"""
Data commands: sample generation, FDM solving and field rendering.
"""

import os

import click

from ..artifacts import audit_tolerance, generate_dataset, load_inputs, prepare_output_dir, solve_inputs
from ..errors import NumericalError
from ..field_io import read_field
from ..render import parse_index, select_slice, write_csv, write_pgm
from .common import config_option, force_option, handle_errors, jobs_option, load_config, seed_option, show_progress


@click.command()
@config_option
@seed_option
@jobs_option
@force_option
@click.option("--count", type=int, default=None, help="Number of samples (default: train.num_samples)")
@click.option("--split", type=click.Choice(["train", "test"]), default="train", show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Dataset directory (default: <output_dir>/data/<split>)")
@handle_errors
def gen(config_path, seed, jobs, force, count, split, out_dir):
    """
    Generate random-field samples as LDNF files with a JSON manifest.

    MSE configurations also store the FDM-solved targets.
    """
    config = load_config(config_path, seed)
    directory = out_dir or os.path.join(config.output_dir, "data", split)
    prepare_output_dir(directory, force)
    count = config.train.num_samples if count is None else count

    manifest = generate_dataset(config, directory, count, split, jobs, show_progress())

    click.echo(f"✅ Generated {manifest['count']} {split} sample(s)")
    click.echo(f"📁 Dataset written to: {directory}")


@click.command()
@config_option
@seed_option
@jobs_option
@force_option
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="Dataset directory from `gen` or a single LDNF file")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: <output_dir>/solve)")
@handle_errors
def solve(config_path, seed, jobs, force, input_path, out_dir):
    """
    Solve every input with the finite-difference reference and audit the residuals.

    A sample whose solver does not converge is reported and skipped; the exit code is 2
    when that happened for any sample.
    """
    config = load_config(config_path, seed)
    directory = out_dir or os.path.join(config.output_dir, "solve")
    prepare_output_dir(directory, force)

    records = solve_inputs(config, load_inputs(input_path), directory, jobs, show_progress())

    tolerance = audit_tolerance(config)
    for record in records:
        if record.converged:
            status = "ok" if record.max_residual <= tolerance else "above tolerance"
            click.echo(f"sample {record.sample_id}: max residual {record.max_residual:.3e} ({status})")
        else:
            click.echo(f"sample {record.sample_id}: ❌ {record.message}")
    click.echo(f"📁 Solutions and audit.csv written to: {directory}")

    failed = [record.sample_id for record in records if not record.converged]
    if failed:
        raise NumericalError(f"{len(failed)} sample(s) did not converge: {failed}")


@click.command()
@click.argument("field_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False), help="Output file")
@click.option("--index", "index_text", default=None,
              help="Comma-separated leading indices selecting a 2D slice, e.g. --index 0,3")
@click.option("--format", "fmt", type=click.Choice(["pgm", "csv"]), default="pgm", show_default=True)
@click.option("--binary", is_flag=True, help="Binary P5 instead of plain P2")
@handle_errors
def render(field_file, out_path, index_text, fmt, binary):
    """
    Render a 2D field as a grayscale PGM heatmap or dump it as a CSV table.

    FIELD_FILE: LDNF field file
    """
    field = select_slice(read_field(field_file), parse_index(index_text))
    if fmt == "csv":
        write_csv(out_path, field)
        click.echo(f"✅ Table written to: {out_path}")
        return
    sidecar = write_pgm(out_path, field, binary)
    click.echo(f"✅ Heatmap written to: {out_path}")
    click.echo(f"📁 Normalization recorded in: {sidecar}")
