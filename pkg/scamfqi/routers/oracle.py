# routers/oracle.py - exact tabular diagnostics for a JSON game
import json
import logging
import os

import click
from pydantic import ValidationError

from scamfqi.core.config import resolve_output_dir
from scamfqi.core.errors import ConfigError
from scamfqi.models.tabular_game import TabularGame, load_distribution, uniform_distribution
from scamfqi.oracle.bounds import oracle_report
from scamfqi.routers.common import k_option, out_option
from scamfqi.schemas.tabular import OracleRequest

logger = logging.getLogger(__name__)


@click.command("oracle")
@click.argument("game_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--nu", "nu_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Data distribution over S x A (uniform when omitted).")
@click.option("--request", "request_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Neighborhoods, K, delta, |F| and |D|.")
@out_option
@k_option
def oracle_command(game_path, nu_path, request_path, out_dir, k):
    """Compute every bound quantity exactly and write boundreport.json"""
    try:
        game = TabularGame.from_file(game_path)
        request = OracleRequest()
        if request_path:
            with open(request_path) as f:
                request = OracleRequest.model_validate(json.load(f))
    except (ValidationError, json.JSONDecodeError) as e:
        raise ConfigError(f"Invalid oracle input: {e}") from e
    nu = load_distribution(nu_path, game) if nu_path else uniform_distribution(game)
    hoods = request.neighborhoods or [[i] for i in range(game.agent_count)]
    report = oracle_report(
        game, nu, hoods, k or request.iterations, request.delta,
        request.function_class_size, request.dataset_size, request.tol,
    )
    out = resolve_output_dir(out_dir)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "boundreport.json"), "w") as f:
        f.write(report.model_dump_json(indent=2))
    click.echo(f"bound {report.bound_value:.6g} (bias {report.bias_term:.4g}, sampling {report.sampling_term:.4g}, "
               f"inherent {report.inherent_term:.4g}); observed gap {report.observed_gap:.4g}")
