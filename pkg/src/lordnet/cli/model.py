"""
Model commands: training, evaluation, gradient checking and experiment presets.
"""

import json
import os

import click

from ..checkpoints import load_checkpoint
from ..config.run_config import run_config_to_dict
from ..datasets import build_test_set
from ..errors import AcceptanceError, ConfigError
from ..evaluate import FdmReference, evaluate, write_report
from ..experiments import PresetScale, get_preset, preset_names, run_preset
from ..gradcheck_suite import PASS_THRESHOLD, failures, run_suite, suite_builders
from ..models import build_model
from ..train import train as run_training
from ..warm_start import WarmStartCache
from .common import (
    config_option,
    force_option,
    handle_errors,
    load_config,
    output_root,
    refuse_existing,
    seed_option,
    show_progress,
)


def _cache(config, cache_dir) -> WarmStartCache:
    return WarmStartCache(cache_dir or os.path.join(config.output_dir, "warm_start"))


@click.command()
@config_option
@seed_option
@force_option
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None,
              help="Warm-start cache directory (default: <output_dir>/warm_start)")
@handle_errors
def train(config_path, seed, force, cache_dir):
    """
    Train the configured network; checkpoints and loss_curve.csv go to output_dir.
    """
    config = load_config(config_path, seed)
    refuse_existing(os.path.join(config.output_dir, "checkpoints"), force)
    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, "config.json"), "w", encoding="utf-8") as f:
        json.dump(run_config_to_dict(config), f, indent=2, sort_keys=True)
        f.write("\n")

    model = build_model(config.network_config())
    click.echo(f"🔄 Training {model.kind} ({model.parameter_count} parameters) for {config.train.max_iters} iterations")
    result = run_training(model, config.train_config(), config.output_dir, _cache(config, cache_dir),
                          show_progress())

    if result.loss_curve:
        click.echo(f"Final loss: {result.loss_curve[-1].loss:.6e}")
    click.echo("✅ Training finished")
    click.echo(f"📁 Checkpoints written to: {os.path.join(config.output_dir, 'checkpoints')}")


@click.command(name="eval")
@config_option
@seed_option
@force_option
@click.option("--checkpoint", "checkpoint_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Checkpoint directory to evaluate")
@click.option("--fdm", "use_fdm", is_flag=True, help="Evaluate the finite-difference reference itself")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Report directory (default: <output_dir>/eval)")
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None,
              help="Warm-start cache directory (default: <output_dir>/warm_start)")
@handle_errors
def evaluate_command(config_path, seed, force, checkpoint_dir, use_fdm, out_dir, cache_dir):
    """
    Relative errors on held-out samples: eval.csv, eval.json and timing.json.
    """
    if bool(checkpoint_dir) == use_fdm:
        raise ConfigError("pass exactly one of --checkpoint and --fdm", "eval")
    config = load_config(config_path, seed)
    directory = out_dir or os.path.join(config.output_dir, "eval")
    refuse_existing(os.path.join(directory, "eval.json"), force)

    spec = config.residual_spec()
    if use_fdm:
        model, repetitions = FdmReference(spec, config.train.cg_tol), 0
    else:
        model, _ = load_checkpoint(checkpoint_dir)
        repetitions = config.eval.timing_repetitions
    protocol = config.eval_protocol()
    test_set = build_test_set(spec, config.input_field_params(), config.seeds.base, config.eval.num_samples,
                              protocol, config.problem.test_warm_start_time, config.train.cg_tol,
                              _cache(config, cache_dir), show_progress())

    report = evaluate(model, test_set, protocol, repetitions)
    write_report(report, directory, test_set.sample_ids)

    click.echo(f"Relative error ({protocol.kind.value}, horizon {protocol.horizon}): "
               f"{report.mean:.6e} ± {report.std:.6e} over {len(report.errors)} sample(s)")
    if report.median_inference_ms is not None:
        click.echo(f"Median inference time: {report.median_inference_ms:.3f} ms")
    click.echo(f"📁 Report written to: {directory}")


@click.command()
@click.option("--seeds", "seed_count", type=click.IntRange(min=1), default=10, show_default=True,
              help="Number of seeds per check")
@click.option("--only", "names", multiple=True, help="Run only the named checks")
@click.option("--list", "list_only", is_flag=True, help="List the checks and exit")
@handle_errors
def gradcheck(seed_count, names, list_only):
    """
    Compare every tape gradient with central finite differences.

    Exits with code 3 when any deviation reaches the pass threshold.
    """
    if list_only:
        for name in suite_builders():
            click.echo(name)
        return
    results = run_suite(range(seed_count), names or None)
    for name, deviation in results.items():
        mark = "✅" if deviation < PASS_THRESHOLD else "❌"
        click.echo(f"{mark} {name:<28} {deviation:.3e}")

    failed = failures(results)
    if failed:
        raise AcceptanceError(
            f"{len(failed)} gradient check(s) deviate by {PASS_THRESHOLD:g} or more",
            [f"{name}: {deviation:.3e}" for name, deviation in failed.items()],
        )
    click.echo(f"✅ All {len(results)} checks below {PASS_THRESHOLD:g}")


@click.command()
@click.argument("name", required=False)
@seed_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Archive root (default: $LORDNET_OUT or ./runs)")
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None,
              help="Warm-start cache directory (default: <archive root>/warm_start)")
@click.option("--list", "list_only", is_flag=True, help="List the presets and exit")
@handle_errors
def experiments(name, seed, out_dir, cache_dir, list_only):
    """
    Run an experiment preset and check it against its expected metrics.

    NAME: Preset name (see --list)
    """
    if list_only or not name:
        for scale in PresetScale:
            for preset_name in preset_names(scale):
                click.echo(f"{preset_name} ({scale.value}): {get_preset(preset_name).description}")
        return

    root = output_root(out_dir)
    click.echo(f"🔄 Running preset {name}")
    result = run_preset(name, root, seed, cache_dir, show_progress())
    for metric, value in sorted(result.metrics.items()):
        click.echo(f"   {metric}: {value:.6e}")
    status = "✅ passed" if result.passed else "⚠️ missed full-scale expectations"
    click.echo(f"{status}: {name}")
    click.echo(f"📁 Archived under: {result.directory}")
