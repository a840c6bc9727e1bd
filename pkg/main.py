# main.py - scamfqi command line entry point

import logging
import sys

import click

from scamfqi.core.config import LOG_LEVEL
from scamfqi.core.errors import ScamFqiError
from scamfqi.routers.data import collect_command
from scamfqi.routers.experiments import report_command, run_command
from scamfqi.routers.oracle import oracle_command
from scamfqi.routers.training import eval_command, train_command

logger = logging.getLogger("scamfqi")


class ScamFqiGroup(click.Group):
    """Maps known failures to exit codes: 2 for bad configs, 3 for everything else."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.ClickException, click.exceptions.Exit, click.Abort):
            raise
        except ScamFqiError as e:
            click.echo(f"error: {e.detail}", err=True)
            ctx.exit(e.exit_code)
        except Exception as e:
            logger.exception("unexpected failure")
            click.echo(f"error: {e}", err=True)
            ctx.exit(3)


@click.group(cls=ScamFqiGroup)
@click.option("--log-level", default=LOG_LEVEL, show_default=True, help="Python logging level.")
def cli(log_level):
    """Per-agent fitted Q-iteration with information sharing"""
    logging.basicConfig(level=getattr(logging, str(log_level).upper(), logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


# Commands
cli.add_command(collect_command)
cli.add_command(train_command)
cli.add_command(eval_command)
cli.add_command(run_command)
cli.add_command(oracle_command)
cli.add_command(report_command)


def main():
    sys.exit(cli(prog_name="scamfqi"))


if __name__ == "__main__":
    main()
