# routers/training.py - training and evaluation commands
import json
import logging
import os

import click

from scamfqi.core.errors import ArgumentError
from scamfqi.database.checkpoints import TRAINING_LOG, load_checkpoint, save_checkpoint, write_training_log
from scamfqi.database.datasets import load_datasets, load_manifest
from scamfqi.learning.fqi import evaluate, train
from scamfqi.learning.policies import AgentPolicy
from scamfqi.models.sharing import distance_graph
from scamfqi.routers.common import config_option, d_option, k_option, load_config, out_option, output_dir, seed_option
from scamfqi.services.collector import uniform_policies
from scamfqi.services.harness import build_env, train_config_for

logger = logging.getLogger(__name__)


# ========== TRAINING ==========

@click.command("train")
@config_option
@out_option
@seed_option
@k_option
@click.option("--data", "data_dir", type=click.Path(file_okay=False), default=None,
              help="Dataset folder (defaults to <out>/data).")
def train_command(config_path, out_dir, seed, k, data_dir):
    """Run K iterations of per-agent fitted Q-iteration on collected datasets"""
    config = load_config(config_path, seed=seed, k=k)
    out = output_dir(config, out_dir)
    data_dir = data_dir or os.path.join(out, "data")
    env = build_env(config)
    datasets = load_datasets(data_dir)
    if not datasets:
        raise ArgumentError(f"{data_dir} holds no datasets")
    result = train(env, datasets, train_config_for(config, env, config.seeds[0]))
    for it, pairs in enumerate(result.iterations):
        save_checkpoint(out, it, [q for q, _ in pairs])
    write_training_log(os.path.join(out, TRAINING_LOG), result.log)
    click.echo(f"trained {config.K} iterations for {env.agent_count} agents -> {out}")


# ========== EVALUATION ==========

@click.command("eval")
@config_option
@out_option
@seed_option
@d_option
@k_option
@click.option("--episodes", type=click.IntRange(min=1), default=None, help="Overrides episodes_eval.")
@click.option("--epsilon", type=click.FloatRange(0.0, 1.0), default=None, help="Evaluate with this epsilon instead.")
def eval_command(config_path, out_dir, seed, d_values, k, episodes, epsilon):
    """Evaluate the policies of checkpoint k (k = 0 is the uniform baseline)"""
    config = load_config(config_path, seed=seed, d_values=d_values)
    out = output_dir(config, out_dir)
    env = build_env(config)
    k = config.K if k is None else k
    manifest_dir = os.path.join(out, "data")
    if os.path.exists(os.path.join(manifest_dir, "manifest.json")) and not d_values:
        graph = load_manifest(manifest_dir).graph
    else:
        graph = distance_graph(env.layout, config.d_values[0])
    if k == 0:
        policies = uniform_policies(env)
        mode = config.modes[0]
    else:
        qs = load_checkpoint(out, k, env)
        policies = [AgentPolicy(q, config.epsilon) for q in qs]
        mode = qs[0].schema.mode
    summary = evaluate(env, policies, graph, mode, episodes or config.episodes_eval, config.seeds[0], epsilon_override=epsilon)
    with open(os.path.join(out, f"eval_{k}.json"), "w") as f:
        json.dump(summary, f, indent=2)
    click.echo(f"iteration {k}: mean makespan {summary['mean_makespan']:.2f}, mean return {summary['mean_return']:.4g}")
