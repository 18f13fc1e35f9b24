# routers/common.py
"""Options and artifact loaders shared by every command module."""
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple
import functools
import logging

import click

from app.config import load_experiment_config, settings
from app.models.classifier import SpectrogramClassifier
from app.schemas.attack import AttackTag, AttackVector
from app.schemas.data import Dataset
from app.schemas.experiment import ExperimentConfig
from app.services.attack_service import load_attack
from app.services.classifier_service import load_checkpoint
from app.services.data_service import load_dataset
from app.utils import ArtifactPaths, check_manifest, config_hash, require_artifact

logger = logging.getLogger(__name__)

# command-line variant name -> provenance tag stored in attack files and reports
VARIANT_TAGS = {
    "fft": AttackTag.FFT,
    "fft_phase1_only": AttackTag.FFT_PHASE1_ONLY,
    "fft_no_spectrum": AttackTag.FFT_NO_SPECTRUM_LOSS,
    "fft_no_timeshift": AttackTag.FFT_NO_TIMESHIFT,
    "uap": AttackTag.UAP,
    "noise": AttackTag.NOISE,
}

MODEL_TAGS = ("WB", "BB")


class Experiment:
    """Resolved config plus its hash and artifact layout."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.paths = ArtifactPaths(cfg.output_dir)

    @classmethod
    def resolve(cls, config_path: Optional[str], overrides: Iterable[str], output_dir: Optional[str]) -> "Experiment":
        if config_path is None and Path(settings.CONFIG_PATH).exists():
            config_path = settings.CONFIG_PATH
        experiment = cls(load_experiment_config(config_path, list(overrides), output_dir))
        check_manifest(experiment.paths, experiment.hash)
        logger.info(f"Experiment {experiment.hash} -> {experiment.paths.root}")
        return experiment

    def dataset(self, split: str) -> Dataset:
        path = require_artifact(self.paths.dataset(split), "synth-data")
        return load_dataset(path, expected_hash=self.hash)

    def model(self, model_tag: str) -> SpectrogramClassifier:
        path = require_artifact(self.paths.checkpoint(model_tag), "train-classifier")
        return load_checkpoint(path, expected_arch=self.cfg.model.arch, expected_hash=self.hash)

    def attack(self, variant: str, seed: int) -> AttackVector:
        path = require_artifact(self.paths.attack(variant, seed), f"train-attack --variant {variant}")
        return load_attack(path, expected_hash=self.hash)

    def seeds(self) -> List[int]:
        return list(self.cfg.attack.run_seeds)

    def band(self) -> Optional[Tuple[float, float]]:
        if self.cfg.dataset.source != "synthetic":
            return None
        synth = self.cfg.dataset.synth
        return synth.band_low_hz, synth.band_high_hz

    def band_edge(self, sample_rate: float) -> float:
        band = self.band()
        return band[1] if band else sample_rate / 4.0


def experiment_options(command):
    """--config / --set / --output-dir, resolved into an ``experiment`` argument."""

    @click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                  help="Experiment YAML file (default: Settings.CONFIG_PATH when present).")
    @click.option("--set", "overrides", multiple=True, metavar="SECTION.LEAF=VALUE",
                  help="Override one config leaf; repeatable.")
    @click.option("--output-dir", default=None, help="Artifact directory (overrides the config).")
    @functools.wraps(command)
    def wrapper(config_path, overrides, output_dir, **kwargs):
        return command(Experiment.resolve(config_path, overrides, output_dir), **kwargs)

    return wrapper


def seeds_record(experiment: Experiment, **extra) -> Dict[str, object]:
    record = {"run_seeds": experiment.seeds()}
    record.update(extra)
    return record
