# routers/experiments.py - full sweeps and report regeneration
import logging

import click

from scamfqi.routers.common import config_option, d_option, k_option, load_config, mode_option, out_option, output_dir, seed_option
from scamfqi.services import harness

logger = logging.getLogger(__name__)


@click.command("run")
@config_option
@out_option
@seed_option
@d_option
@mode_option
@k_option
def run_command(config_path, out_dir, seed, d_values, mode, k):
    """Collect, train and evaluate every (d, mode, seed) cell, then aggregate"""
    config = load_config(config_path, seed=seed, d_values=d_values, mode=mode, k=k)
    out = output_dir(config, out_dir)
    points = harness.run(config, out)
    final = [p for p in points if p.iteration == config.K]
    for p in final:
        click.echo(f"{p.label}: final makespan {p.mean_makespan:.2f} [{p.ci_low:.2f}, {p.ci_high:.2f}]")
    click.echo(f"results -> {out}")


@click.command("report")
@config_option
@out_option
def report_command(config_path, out_dir):
    """Rebuild curves and trends from results.csv"""
    config = load_config(config_path)
    out = output_dir(config, out_dir)
    points = harness.report(out, config.ci_level, config.bootstrap_resamples)
    click.echo(f"rebuilt {len(points)} curve points in {out}")
