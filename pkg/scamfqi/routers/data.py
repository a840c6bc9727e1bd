# routers/data.py - offline dataset collection command
import logging
import os

import click

from scamfqi.database.datasets import save_datasets
from scamfqi.models.sharing import distance_graph
from scamfqi.routers.common import config_option, d_option, load_config, mode_option, out_option, output_dir, seed_option
from scamfqi.services.collector import collect
from scamfqi.services.harness import build_env

logger = logging.getLogger(__name__)


@click.command("collect")
@config_option
@out_option
@seed_option
@d_option
@mode_option
@click.option("--episodes", type=click.IntRange(min=1), default=None, help="Overrides episodes_collect.")
def collect_command(config_path, out_dir, seed, d_values, mode, episodes):
    """Collect per-agent datasets under the uniform behavior policy"""
    config = load_config(config_path, seed=seed, d_values=d_values, mode=mode)
    out = output_dir(config, out_dir)
    env = build_env(config)
    d, obs_mode, run_seed = config.d_values[0], config.modes[0], config.seeds[0]
    graph = distance_graph(env.layout, d)
    datasets = collect(env, graph, obs_mode, None, episodes or config.episodes_collect, env.horizon, run_seed)
    path = os.path.join(out, "data")
    manifest = save_datasets(datasets, path, graph)
    click.echo(f"collected {sum(manifest.record_counts.values())} records for {len(datasets)} agents -> {path}")
