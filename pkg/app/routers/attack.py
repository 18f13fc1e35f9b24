# routers/attack.py
import logging

import click

from app.errors import ConfigError
from app.routers.common import VARIANT_TAGS, Experiment, experiment_options, seeds_record
from app.schemas.attack import AttackVector
from app.schemas.experiment import ATTACK_VARIANTS
from app.services.attack_service import gaussian_noise_attack, save_attack, spectrum_violation_fraction, train_fourier_attack, train_uap
from app.utils import update_manifest

logger = logging.getLogger(__name__)

# FourierAttackConfig changes per ablation variant
FOURIER_VARIANTS = {
    "fft": {},
    "fft_phase1_only": {"phase1_fraction": 1.0},
    "fft_no_spectrum": {"beta": 0.0},
    "fft_no_timeshift": {"time_shift": False},
}


def build_attack(experiment: Experiment, variant: str, seed: int, model=None, train=None) -> AttackVector:
    section = experiment.cfg.attack
    train = train if train is not None else experiment.dataset("train")
    if variant == "noise":
        return gaussian_noise_attack(train.length, train.sample_rate, seed)
    model = model if model is not None else experiment.model("WB")
    if variant == "uap":
        uap = section.uap
        return train_uap(model, train, uap.epochs, uap.step, uap.norm_budget, seed, max_examples=uap.max_examples)
    if variant in FOURIER_VARIANTS:
        cfg = section.fourier.model_copy(update={**FOURIER_VARIANTS[variant], "seed": seed})
        return train_fourier_attack(model, train, cfg, tag=VARIANT_TAGS[variant])
    raise ConfigError(f"unknown attack variant {variant!r}; expected one of {ATTACK_VARIANTS}")


def run_train_attack(experiment: Experiment, variant: str):
    """Train ``variant`` once per run seed against the white-box classifier."""
    if variant not in ATTACK_VARIANTS:
        raise ConfigError(f"unknown attack variant {variant!r}; expected one of {ATTACK_VARIANTS}")
    train = experiment.dataset("train")
    model = None if variant == "noise" else experiment.model("WB")
    outputs = []
    for seed in experiment.seeds():
        attack = build_attack(experiment, variant, seed, model=model, train=train)
        path = experiment.paths.attack(variant, seed)
        save_attack(attack, path, experiment.hash)
        outputs.append(path)
        violations = spectrum_violation_fraction(train, attack.v_time.samples, experiment.cfg.attack.fourier.cap)
        logger.info(f"{variant} seed {seed}: spectrum violations on train {violations:.4f}, saved {path}")
    update_manifest(experiment.paths, experiment.hash, f"train-attack:{variant}", seeds_record(experiment), outputs)


@click.command("train-attack")
@click.option("--variant", type=click.Choice(ATTACK_VARIANTS), required=True)
@experiment_options
def train_attack(experiment: Experiment, variant: str):
    """Train one attack variant for every run seed."""
    run_train_attack(experiment, variant)


router = (train_attack,)
