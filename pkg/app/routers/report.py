# routers/report.py
import logging

import click

from app.routers.common import Experiment, experiment_options
from app.services.report_service import write_summary
from app.utils import update_manifest

logger = logging.getLogger(__name__)


def run_report(experiment: Experiment) -> dict:
    summary = write_summary(experiment.paths, experiment.hash)
    update_manifest(
        experiment.paths,
        experiment.hash,
        "report",
        {},
        [experiment.paths.summary, experiment.paths.consolidated_csv],
    )
    return summary


@click.command("report")
@experiment_options
def report(experiment: Experiment):
    """Consolidate every protocol report into summary.csv and summary.json."""
    summary = run_report(experiment)
    for name, verdict in summary["acceptance"].items():
        click.echo(f"{name}: {verdict['status']}")


router = (report,)
