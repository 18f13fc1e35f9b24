# routers/evaluation.py
from typing import Dict, List
import logging

import click

from app.errors import ConfigError
from app.routers.common import MODEL_TAGS, Experiment, experiment_options, seeds_record
from app.schemas.attack import AttackTag
from app.schemas.evaluation import EvalReport
from app.schemas.experiment import PROTOCOLS
from app.services.attack_service import AttackSource, FgsmSource, UniversalSource
from app.services.eval_service import (
    aggregate_reports,
    asr_vs_snr,
    default_shift_grid,
    defense_auc,
    filtering_protocol,
    limit_examples,
    save_report,
    spectrum_profile,
    time_invariance_sweep,
)
from app.utils import update_manifest

logger = logging.getLogger(__name__)

FGSM = AttackTag.FGSM.value


class EvalContext:
    """Models, evaluation data and attacks loaded once per protocol run."""

    def __init__(self, experiment: Experiment):
        self.experiment = experiment
        section = experiment.cfg.eval
        self.val = limit_examples(experiment.dataset("val"), section.max_eval_examples, section.seed)
        self.models = {tag: experiment.model(tag) for tag in MODEL_TAGS}

    def sources(self, variant: str) -> Dict[int, AttackSource]:
        if variant == FGSM:
            return {0: FgsmSource(self.models["WB"], self.experiment.cfg.attack.fgsm_epsilon)}
        return {seed: UniversalSource(self.experiment.attack(variant, seed)) for seed in self.experiment.seeds()}

    def variants(self, include_fgsm: bool = True) -> List[str]:
        variants = list(self.experiment.cfg.attack.variants)
        return variants + [FGSM] if include_fgsm else variants


def _save(experiment: Experiment, report: EvalReport, variant: str) -> list:
    report = report.model_copy(update={"config_hash": experiment.hash})
    json_path = experiment.paths.report(report.protocol, variant, report.model_tag)
    csv_path = experiment.paths.report(report.protocol, variant, report.model_tag, suffix="csv")
    save_report(report, json_path, csv_path)
    return [json_path, csv_path]


def eval_asr_snr(ctx: EvalContext) -> list:
    grid = ctx.experiment.cfg.eval.snr_grid
    outputs = []
    for variant in ctx.variants():
        sources = ctx.sources(variant)
        for model_tag in MODEL_TAGS:
            runs = [
                asr_vs_snr(ctx.models[model_tag], ctx.val, source, grid, model_tag=model_tag, seed=seed)
                for seed, source in sources.items()
            ]
            outputs += _save(ctx.experiment, aggregate_reports(runs), variant)
    return outputs


def eval_time_shift(ctx: EvalContext) -> list:
    section = ctx.experiment.cfg.eval
    grid = default_shift_grid(ctx.val, section.shift_count)
    outputs = []
    for variant in ctx.variants(include_fgsm=False):
        runs = [
            time_invariance_sweep(ctx.models["WB"], ctx.val, source, grid, snr_db=section.shift_snr_db, seed=seed)
            for seed, source in ctx.sources(variant).items()
        ]
        outputs += _save(ctx.experiment, aggregate_reports(runs), variant)
    return outputs


def eval_filtering(ctx: EvalContext) -> list:
    cfg = ctx.experiment.cfg
    attacks = {}
    variant_of = {}
    for variant in ctx.variants():
        sources = ctx.sources(variant)
        tag = next(iter(sources.values())).tag
        attacks[tag] = sources
        variant_of[tag] = variant
    reports = filtering_protocol(
        attacks,
        ctx.experiment.dataset("train"),
        ctx.val,
        cfg.eval.cutoff_grid,
        epochs=cfg.eval.filter_train_epochs,
        lr=cfg.model.lr,
        aug=cfg.model.augment,
        seed=cfg.model.wb_seed,
        arch=cfg.model.arch,
        stft=cfg.model.stft,
        momentum=cfg.model.momentum,
        batch_size=cfg.model.batch_size,
        snr_db=cfg.eval.filter_snr_db,
        target_asr=cfg.eval.calibration_target_asr,
        band_edge_hz=ctx.experiment.band_edge(ctx.val.sample_rate),
    )
    outputs = []
    for tag, report in reports.items():
        outputs += _save(ctx.experiment, report, variant_of[tag])
    return outputs


def eval_defense_auc(ctx: EvalContext) -> list:
    section = ctx.experiment.cfg.eval
    outputs = []
    for variant in ctx.variants():
        runs = [
            defense_auc(
                ctx.models["WB"],
                ctx.val,
                source,
                section.transforms,
                section.n_each,
                section.seed,
                snr_db=section.defense_snr_db,
                distance_on=section.distance_on,
                band=ctx.experiment.band(),
                run_seed=seed,
            )
            for seed, source in ctx.sources(variant).items()
        ]
        outputs += _save(ctx.experiment, aggregate_reports(runs), variant)
    return outputs


def eval_spectrum(ctx: EvalContext) -> list:
    section = ctx.experiment.cfg.eval
    cutoff = ctx.experiment.band_edge(ctx.val.sample_rate)
    outputs = []
    for variant in ctx.variants():
        runs = [
            spectrum_profile(ctx.val, source, section.spectrum_snr_db, cutoff, run_seed=seed)
            for seed, source in ctx.sources(variant).items()
        ]
        outputs += _save(ctx.experiment, aggregate_reports(runs), variant)
    return outputs


PROTOCOL_RUNNERS = {
    "asr_snr": eval_asr_snr,
    "time_shift": eval_time_shift,
    "filtering": eval_filtering,
    "defense_auc": eval_defense_auc,
    "spectrum": eval_spectrum,
}


def run_eval(experiment: Experiment, protocol: str):
    if protocol not in PROTOCOL_RUNNERS:
        raise ConfigError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    logger.info(f"Running protocol {protocol}")
    outputs = PROTOCOL_RUNNERS[protocol](EvalContext(experiment))
    update_manifest(
        experiment.paths,
        experiment.hash,
        f"eval:{protocol}",
        seeds_record(experiment, eval=experiment.cfg.eval.seed),
        outputs,
    )


@click.command("eval")
@click.option("--protocol", type=click.Choice(PROTOCOLS), required=True)
@experiment_options
def evaluate(experiment: Experiment, protocol: str):
    """Run one measurement protocol over every configured attack variant."""
    run_eval(experiment, protocol)


router = (evaluate,)
