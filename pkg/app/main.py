import logging

import click

from app.errors import ToolkitError
from app.routers import attack, classifier, data, evaluation, pipeline, report
from app.utils import configure_logging, configure_torch

logger = logging.getLogger(__name__)


class ToolkitGroup(click.Group):
    """Turns every uncaught error into one ``error: <category>: <message>`` line."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (click.exceptions.ClickException, click.exceptions.Exit, click.exceptions.Abort):
            raise
        except ToolkitError as e:
            click.echo(f"error: {e.category}: {e}", err=True)
            ctx.exit(2)
        except Exception as e:
            logger.debug("unhandled error", exc_info=True)
            click.echo(f"error: internal: {type(e).__name__}: {e}", err=True)
            ctx.exit(1)


@click.group(cls=ToolkitGroup)
@click.option("--log-level", default=None, help="Overrides Settings.LOG_LEVEL.")
def cli(log_level):
    """Universal Fourier attack toolkit: data, classifiers, attacks, evaluation and reports."""
    configure_logging(log_level)
    configure_torch()


def include_router(group: click.Group, router):
    for command in router:
        group.add_command(command)


include_router(cli, data.router)
include_router(cli, classifier.router)
include_router(cli, attack.router)
include_router(cli, evaluation.router)
include_router(cli, report.router)
include_router(cli, pipeline.router)


if __name__ == "__main__":
    cli()
