# routers/common.py - options and config plumbing shared by every command
import logging

import click

from scamfqi.core.config import resolve_output_dir
from scamfqi.core.errors import ConfigError
from scamfqi.schemas.experiment import ExperimentConfig
from scamfqi.schemas.graph import ObservationMode

logger = logging.getLogger(__name__)


def parse_d_values(ctx, param, value):
    if value is None:
        return None
    try:
        values = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter("expected a comma separated list of integers, e.g. 1,2,3")
    if not values or any(v < 0 for v in values):
        raise click.BadParameter("d values must be non-negative integers")
    return values


config_option = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                             help="Experiment config (TOML or JSON).")
out_option = click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
                          help="Output directory (SCAMFQI_OUT wins).")
seed_option = click.option("--seed", type=int, default=None, help="Seed (defaults to the config's first seed).")
d_option = click.option("--d", "d_values", callback=parse_d_values, default=None,
                        help="Sharing distance(s), comma separated.")
mode_option = click.option("--mode", type=click.Choice([m.value for m in ObservationMode]), default=None,
                           help="Observation mode for shared members.")
k_option = click.option("--k", "k", type=click.IntRange(min=0), default=None, help="Number of iterations / checkpoint index.")


def load_config(config_path: str | None, **overrides) -> ExperimentConfig:
    config = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()
    updates = {}
    if overrides.get("seed") is not None:
        updates["seeds"] = [overrides["seed"]]
    if overrides.get("d_values"):
        updates["d_values"] = overrides["d_values"]
    if overrides.get("mode"):
        updates["modes"] = [ObservationMode(overrides["mode"])]
    if overrides.get("k") is not None:
        updates["K"] = overrides["k"]
    try:
        # re-validate so overrides obey the same rules as the file
        return ExperimentConfig.model_validate({**config.model_dump(), **updates})
    except ValueError as e:
        raise ConfigError(f"Invalid overrides: {e}") from e


def output_dir(config: ExperimentConfig, out_dir: str | None) -> str:
    return resolve_output_dir(out_dir or config.output_dir)
