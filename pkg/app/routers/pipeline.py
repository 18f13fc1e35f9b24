# routers/pipeline.py
import logging

import click

from app.routers.attack import run_train_attack
from app.routers.classifier import run_train_classifier
from app.routers.common import Experiment, experiment_options
from app.routers.data import run_synth_data
from app.routers.evaluation import run_eval
from app.routers.report import run_report
from app.schemas.experiment import PROTOCOLS

logger = logging.getLogger(__name__)


@click.command("run-all")
@experiment_options
def run_all(experiment: Experiment):
    """Data, both classifiers, every attack variant, every protocol, then the report."""
    run_synth_data(experiment)
    run_train_classifier(experiment)
    for variant in experiment.cfg.attack.variants:
        run_train_attack(experiment, variant)
    for protocol in PROTOCOLS:
        run_eval(experiment, protocol)
    summary = run_report(experiment)
    for name, verdict in summary["acceptance"].items():
        click.echo(f"{name}: {verdict['status']}")


router = (run_all,)
