# routers/data.py
import logging

import click

from app.routers.common import Experiment, experiment_options
from app.services.data_service import generate_synthetic, load_wav_corpus, save_dataset, split
from app.utils import update_manifest

logger = logging.getLogger(__name__)


def run_synth_data(experiment: Experiment):
    """Build train/val splits (synthetic or WAV corpus) and cache them."""
    section = experiment.cfg.dataset
    if section.source == "synthetic":
        train, val = generate_synthetic(section.synth)
        seed = section.synth.seed
    else:
        corpus = load_wav_corpus(section.wav_root, section.wav_segment_len, section.wav_segments_per_file, section.seed)
        train, val = split(corpus, 1.0 - section.val_fraction, section.seed)
        seed = section.seed

    outputs = []
    for ds in (train, val):
        path = experiment.paths.dataset(ds.split_tag)
        save_dataset(ds, path, experiment.hash)
        outputs.append(path)
        logger.info(f"Saved {ds.split_tag} split ({len(ds)} signals) to {path}")
    update_manifest(experiment.paths, experiment.hash, "synth-data", {"dataset": seed}, outputs)


@click.command("synth-data")
@experiment_options
def synth_data(experiment: Experiment):
    """Generate (or ingest) the dataset and write the cache files."""
    run_synth_data(experiment)


router = (synth_data,)
