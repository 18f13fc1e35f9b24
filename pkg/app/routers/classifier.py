# routers/classifier.py
import json
import logging

import click

from app.routers.common import MODEL_TAGS, Experiment, experiment_options
from app.services.classifier_service import save_checkpoint, train_classifier
from app.utils import update_manifest

logger = logging.getLogger(__name__)


def run_train_classifier(experiment: Experiment):
    """Train the white-box and black-box classifiers (same data, different seeds)."""
    section = experiment.cfg.model
    train, val = experiment.dataset("train"), experiment.dataset("val")
    seeds = {"WB": section.wb_seed, "BB": section.bb_seed}
    outputs = []
    for tag in MODEL_TAGS:
        logger.info(f"Training {tag} classifier (seed {seeds[tag]})")
        model, log = train_classifier(
            train,
            val,
            epochs=section.epochs,
            lr=section.lr,
            aug=section.augment,
            seed=seeds[tag],
            arch=section.arch,
            stft=section.stft,
            momentum=section.momentum,
            batch_size=section.batch_size,
        )
        checkpoint = experiment.paths.checkpoint(tag)
        save_checkpoint(model, checkpoint, experiment.hash)
        log_path = experiment.paths.train_log(tag)
        # wall time varies run to run; keep it out of the saved log
        log_path.write_text(json.dumps(
            {"config_hash": experiment.hash, **log.model_dump(exclude={"wall_time"})},
            indent=2,
            sort_keys=True,
        ))
        outputs += [checkpoint, log_path]
        if log.val_accuracy:
            logger.info(f"{tag} classifier: best val accuracy {max(log.val_accuracy):.3f} at epoch {log.best_epoch + 1}")
    update_manifest(experiment.paths, experiment.hash, "train-classifier", seeds, outputs)


@click.command("train-classifier")
@experiment_options
def train_classifier_command(experiment: Experiment):
    """Train the WB and BB classifiers and save checkpoints plus training logs."""
    run_train_classifier(experiment)


router = (train_classifier_command,)
