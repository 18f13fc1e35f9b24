# services/eval_service.py
"""Measurement protocols: attack success rate, SNR and time-shift sweeps,
low-pass filtering robustness, the transform-and-compare defense and CER."""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging
import zlib

import numpy as np
import pandas as pd
from sklearn.metrics import auc, roc_curve

from app.errors import EvaluationError
from app.models.classifier import SpectrogramClassifier
from app.schemas.attack import AttackVector
from app.schemas.classifier import ArchitectureSpec, AugmentConfig, StftConfig
from app.schemas.data import Dataset, LabeledSignal
from app.schemas.evaluation import DistancePair, EvalPoint, EvalReport, RocResult
from app.schemas.signal import TimeSeries
from app.services.attack_service import AttackSource, UniversalSource
from app.services.classifier_service import logits_batch, predict, softmax_outputs, train_classifier
from app.services.signal_service import (
    down_up_sample,
    lowpass_samples,
    noise_flood,
    out_of_band_fraction,
    power_samples,
    quantize_dequantize,
    snr_scale_factors,
)
from app.utils import progress

logger = logging.getLogger(__name__)

Predictor = Callable[[np.ndarray], np.ndarray]
AttackLike = Union[AttackVector, AttackSource]


def _predictor(model) -> Predictor:
    if isinstance(model, SpectrogramClassifier):
        return lambda signals: predict(model, signals)
    if callable(model):
        return model
    raise EvaluationError(f"cannot predict with {type(model).__name__}")


def _as_source(attack: AttackLike) -> AttackSource:
    if isinstance(attack, AttackSource):
        return attack
    if isinstance(attack, AttackVector):
        return UniversalSource(attack)
    raise EvaluationError(f"not an attack: {type(attack).__name__}")


# ---------------------------------------------------------------------------
# Attack success rate
# ---------------------------------------------------------------------------

def asr_from_predictions(clean: np.ndarray, adversarial: np.ndarray, labels: np.ndarray) -> float:
    """Among originally-correct predictions, the fraction flipped by the attack."""
    correct = clean == labels
    if not np.any(correct):
        raise EvaluationError("undefined ASR: no originally-correct predictions")
    return float(np.mean(adversarial[correct] != labels[correct]))


def asr(model, ds: Dataset, apply_attack: Callable[[LabeledSignal], TimeSeries]) -> float:
    """ASR with an arbitrary per-example attack function.

    ``model`` is a SpectrogramClassifier or any callable mapping an N x T
    batch to predicted labels.
    """
    if len(ds) == 0:
        raise EvaluationError("ASR of an empty dataset is undefined")
    predict_fn = _predictor(model)
    clean = predict_fn(ds.signals)
    correct = np.flatnonzero(clean == ds.labels)
    if correct.size == 0:
        raise EvaluationError("undefined ASR: no originally-correct predictions")
    adversarial = np.stack([apply_attack(ds.item(int(i))).samples for i in correct])
    flipped = predict_fn(adversarial) != ds.labels[correct]
    return float(np.mean(flipped))


def adversarial_signals(signals: np.ndarray, labels: np.ndarray, source: AttackSource, snr_db: float) -> np.ndarray:
    """x + alpha_x * v with alpha_x chosen per example to hit ``snr_db``.

    Rows whose perturbation has zero power are left unperturbed.
    """
    perturbations = np.asarray(source.perturbations(signals, labels), dtype=np.float64)
    pv = power_samples(perturbations)
    live = pv > 0
    out = np.array(signals, dtype=np.float64, copy=True)
    if np.any(live):
        alpha = snr_scale_factors(power_samples(signals[live]), pv[live], snr_db)
        out[live] += alpha[:, None] * perturbations[live]
    if not np.all(live):
        logger.warning(f"{source.tag}: {int(np.sum(~live))} zero-power perturbation(s) left unapplied")
    return out


def limit_examples(ds: Dataset, max_examples: Optional[int], seed: int = 0) -> Dataset:
    if max_examples is None or len(ds) <= max_examples:
        return ds
    index = np.sort(np.random.default_rng(seed).permutation(len(ds))[:max_examples])
    return ds.subset(index)


def asr_at_snr(model, ds: Dataset, attack: AttackLike, snr_db: float, clean: Optional[np.ndarray] = None) -> float:
    predict_fn = _predictor(model)
    source = _as_source(attack)
    if clean is None:
        clean = predict_fn(ds.signals)
    adv = adversarial_signals(ds.signals, ds.labels, source, snr_db)
    return asr_from_predictions(clean, predict_fn(adv), ds.labels)


def asr_vs_snr(
    model,
    ds: Dataset,
    attack: AttackLike,
    snr_grid: Sequence[float],
    model_tag: str = "WB",
    seed: Optional[int] = None,
) -> EvalReport:
    if len(snr_grid) == 0:
        raise EvaluationError("snr_grid must be nonempty")
    predict_fn = _predictor(model)
    source = _as_source(attack)
    clean = predict_fn(ds.signals)
    points = []
    for snr in progress(snr_grid, desc="snr"):
        value = asr_at_snr(predict_fn, ds, source, snr, clean=clean)
        points.append(EvalPoint(x=float(snr), metric=value, seed=seed))
        logger.info(f"asr_snr {source.tag}/{model_tag} snr={snr} dB asr={value:.3f}")
    return EvalReport(
        protocol="asr_snr",
        attack_tag=source.tag,
        model_tag=model_tag,
        x_name="snr_db",
        metric_name="asr",
        parameters={"snr_grid": [float(s) for s in snr_grid]},
        points=points,
        seeds=[] if seed is None else [seed],
        metadata={"benign_accuracy": float(np.mean(clean == ds.labels))},
    )


# ---------------------------------------------------------------------------
# Time invariance
# ---------------------------------------------------------------------------

def default_shift_grid(ds: Dataset, shift_count: int) -> List[float]:
    """``shift_count`` evenly spaced shifts over one period, starting at 0."""
    period = ds.length / ds.sample_rate
    return [period * i / shift_count for i in range(shift_count)]


def time_invariance_sweep(
    model,
    ds: Dataset,
    attack: AttackLike,
    shift_grid: Sequence[float],
    snr_db: float = 10.0,
    model_tag: str = "WB",
    seed: Optional[int] = None,
) -> EvalReport:
    """ASR when the attack is the segment of its looped copy from t to t + T."""
    source = _as_source(attack)
    if not isinstance(source, UniversalSource):
        raise EvaluationError(f"time-shift sweep needs a universal attack, got {source.tag}")
    period = ds.length / ds.sample_rate
    if any(not 0 <= t < period for t in shift_grid):
        raise EvaluationError(f"shifts must lie in [0, {period}) seconds")
    predict_fn = _predictor(model)
    clean = predict_fn(ds.signals)
    points = []
    for t in progress(shift_grid, desc="shift"):
        # advancing by t selects samples t .. t+T of the loop
        shifted = source.shifted(-t) if t > 0 else source
        value = asr_at_snr(predict_fn, ds, shifted, snr_db, clean=clean)
        points.append(EvalPoint(x=float(t), metric=value, seed=seed))
        logger.info(f"time_shift {source.tag} t={t:.5f}s asr={value:.3f}")
    return EvalReport(
        protocol="time_shift",
        attack_tag=source.tag,
        model_tag=model_tag,
        x_name="shift_s",
        metric_name="asr",
        parameters={"shift_grid": [float(t) for t in shift_grid], "snr_db": snr_db},
        points=points,
        seeds=[] if seed is None else [seed],
    )


# ---------------------------------------------------------------------------
# Filtering robustness
# ---------------------------------------------------------------------------

def calibrate_snr(
    model,
    ds: Dataset,
    attack: AttackLike,
    target_asr: float,
    low_db: float = -30.0,
    high_db: float = 60.0,
    tolerance: float = 0.05,
    max_iter: int = 40,
) -> Tuple[float, float]:
    """Binary search for the SNR whose ASR is within ``tolerance`` of ``target_asr``.

    ASR is treated as decreasing in SNR. Returns (snr_db, achieved_asr); if the
    target is out of reach the nearest end of the bracket is returned.
    """
    predict_fn = _predictor(model)
    source = _as_source(attack)
    clean = predict_fn(ds.signals)

    def measure(snr: float) -> float:
        return asr_at_snr(predict_fn, ds, source, snr, clean=clean)

    value_low = measure(low_db)
    if value_low < target_asr - tolerance:
        logger.warning(f"{source.tag}: ASR {value_low:.3f} at {low_db} dB is below target {target_asr}")
        return low_db, value_low
    value_high = measure(high_db)
    if value_high > target_asr + tolerance:
        return high_db, value_high

    snr, value = low_db, value_low
    for _ in range(max_iter):
        if abs(value - target_asr) <= tolerance:
            break
        mid = 0.5 * (low_db + high_db)
        value = measure(mid)
        snr = mid
        if value > target_asr:
            low_db = mid
        else:
            high_db = mid
    logger.info(f"calibrated {source.tag}: snr={snr:.2f} dB asr={value:.3f} (target {target_asr})")
    return snr, value


def _lowpassed(ds: Dataset, cutoff_hz: float) -> Dataset:
    return ds.with_signals(lowpass_samples(ds.signals, ds.sample_rate, cutoff_hz))


def filtering_protocol(
    attacks: Dict[str, Dict[int, AttackLike]],
    train: Dataset,
    test: Dataset,
    cutoff_grid: Sequence[float],
    epochs: int,
    lr: float,
    aug: AugmentConfig,
    seed: int,
    arch: Optional[ArchitectureSpec] = None,
    stft: Optional[StftConfig] = None,
    momentum: float = 0.9,
    batch_size: int = 32,
    snr_db: float = 10.0,
    target_asr: Optional[float] = None,
    band_edge_hz: Optional[float] = None,
) -> Dict[str, EvalReport]:
    """For each cutoff k, train f_k on low-passed benign data and measure each
    (unfiltered, pre-trained) attack through lowpass_k.

    ``attacks`` maps attack tag -> run seed -> attack. With ``target_asr`` the
    SNR of every attack is first calibrated on the highest-cutoff model.
    Returns one report per attack tag, points aggregated over run seeds.
    """
    nyquist = train.sample_rate / 2.0
    if len(cutoff_grid) == 0:
        raise EvaluationError("cutoff_grid must be nonempty")
    if any(not 0 < c <= nyquist for c in cutoff_grid):
        raise EvaluationError(f"cutoffs must lie in (0, {nyquist}] Hz")
    cutoffs = sorted(float(c) for c in cutoff_grid)

    def fit(cutoff: float) -> SpectrogramClassifier:
        model, log = train_classifier(
            _lowpassed(train, cutoff),
            _lowpassed(test, cutoff),
            epochs=epochs,
            lr=lr,
            aug=aug,
            seed=seed,
            arch=arch,
            stft=stft,
            momentum=momentum,
            batch_size=batch_size,
        )
        return model

    models = {cutoffs[-1]: fit(cutoffs[-1])}
    top = _lowpassed_predictor(models[cutoffs[-1]], test.sample_rate, cutoffs[-1])
    snr_for: Dict[Tuple[str, int], float] = {}
    for tag, runs in attacks.items():
        for run_seed, attack in runs.items():
            if target_asr is None:
                snr_for[(tag, run_seed)] = snr_db
                continue
            snr_for[(tag, run_seed)], _ = calibrate_snr(top, test, attack, target_asr)

    per_seed: Dict[str, Dict[int, List[float]]] = {tag: {s: [] for s in runs} for tag, runs in attacks.items()}
    benign_accuracy = []
    for cutoff in cutoffs:
        model = models[cutoff] if cutoff in models else fit(cutoff)
        filtered = _lowpassed_predictor(model, test.sample_rate, cutoff)
        clean = filtered(test.signals)
        benign_accuracy.append(float(np.mean(clean == test.labels)))
        for tag, runs in attacks.items():
            for run_seed, attack in runs.items():
                value = asr_at_snr(filtered, test, attack, snr_for[(tag, run_seed)], clean=clean)
                per_seed[tag][run_seed].append(value)
                logger.info(f"filtering {tag} seed={run_seed} cutoff={cutoff:.0f} Hz asr={value:.3f}")
        logger.info(f"filtering cutoff={cutoff:.0f} Hz benign_acc={benign_accuracy[-1]:.3f}")

    reports = {}
    for tag, runs in per_seed.items():
        seeds = sorted(runs)
        reports[tag] = _aggregate(
            protocol="filtering",
            attack_tag=tag,
            model_tag="NA",
            x_name="cutoff_hz",
            metric_name="asr",
            xs=cutoffs,
            runs={s: runs[s] for s in seeds},
            parameters={
                "cutoff_grid": cutoffs,
                "snr_db": {str(s): snr_for[(tag, s)] for s in seeds},
                "calibration_target_asr": target_asr,
                "band_edge_hz": band_edge_hz,
            },
            metadata={"benign_accuracy": benign_accuracy},
        )
    return reports


def _lowpassed_predictor(model: SpectrogramClassifier, sample_rate: float, cutoff: float) -> Predictor:
    return lambda signals: predict(model, lowpass_samples(signals, sample_rate, cutoff))


# ---------------------------------------------------------------------------
# Transform-and-compare defense
# ---------------------------------------------------------------------------

Transform = Callable[[TimeSeries, int], TimeSeries]


def resolve_transform(name: str, band: Optional[Tuple[float, float]] = None, sigma: float = 0.01) -> Transform:
    """Defense transform by name; each takes (signal, per-example seed)."""
    if name == "identity":
        return lambda x, seed: x
    if name == "quantize":
        return lambda x, seed: quantize_dequantize(x, bits=8)
    if name == "down_up":
        return lambda x, seed: down_up_sample(x)
    if name == "noise_flood":
        return lambda x, seed: noise_flood(x, sigma=sigma, seed=seed)
    if name == "noise_flood_band":
        if band is None:
            raise EvaluationError("noise_flood_band needs a frequency band")
        return lambda x, seed: noise_flood(x, sigma=sigma, seed=seed, band=band)
    raise EvaluationError(f"unknown transform {name!r}")


def _content_keys(signals: np.ndarray, seed: int, salt: int) -> np.ndarray:
    """Per-example key derived from the samples alone, so selection ignores dataset order."""
    keys = np.empty(signals.shape[0], dtype=np.uint64)
    for i, row in enumerate(signals):
        crc = zlib.crc32(np.ascontiguousarray(row, dtype="<f8").tobytes())
        keys[i] = np.random.SeedSequence([crc, seed, salt]).generate_state(1, dtype=np.uint64)[0]
    return keys


def _select(signals: np.ndarray, n: int, seed: int, salt: int) -> Tuple[np.ndarray, np.ndarray]:
    keys = _content_keys(signals, seed, salt)
    order = np.lexsort((np.arange(keys.size), keys))[:n]
    return order, keys[order]


def _output_distances(model: SpectrogramClassifier, inputs: np.ndarray, transformed: np.ndarray, distance_on: str) -> np.ndarray:
    if distance_on == "softmax":
        a, b = softmax_outputs(model, inputs), softmax_outputs(model, transformed)
    elif distance_on == "logits":
        a, b = logits_batch(model, inputs), logits_batch(model, transformed)
    else:
        raise EvaluationError(f"distance_on must be 'softmax' or 'logits', got {distance_on!r}")
    return np.linalg.norm(a - b, axis=1)


def _transform_rows(signals: np.ndarray, sample_rate: float, transform: Transform, keys: np.ndarray) -> np.ndarray:
    out = np.empty_like(signals)
    for j, row in enumerate(signals):
        noise_seed = int(keys[j] % np.uint64(2 ** 32))
        out[j] = transform(TimeSeries(samples=row, sample_rate=sample_rate), noise_seed).samples
    return out


def transform_compare(
    model: SpectrogramClassifier,
    ds: Dataset,
    attack: AttackLike,
    transform: Union[str, Transform],
    n_each: int,
    seed: int,
    snr_db: float = 10.0,
    distance_on: str = "softmax",
    band: Optional[Tuple[float, float]] = None,
) -> DistancePair:
    """L2 distances between model outputs on an input and its transformed version,
    for ``n_each`` benign and ``n_each`` adversarial inputs."""
    if len(ds) == 0:
        raise EvaluationError("transform_compare needs a nonempty dataset")
    if n_each < 1:
        raise EvaluationError(f"n_each must be positive, got {n_each}")
    fn = resolve_transform(transform, band=band) if isinstance(transform, str) else transform
    source = _as_source(attack)
    n = min(n_each, len(ds))

    benign_rows, benign_keys = _select(ds.signals, n, seed, salt=0)
    adv_rows, adv_keys = _select(ds.signals, n, seed, salt=1)
    benign = ds.signals[benign_rows]
    adversarial = adversarial_signals(ds.signals[adv_rows], ds.labels[adv_rows], source, snr_db)

    d_benign = _output_distances(model, benign, _transform_rows(benign, ds.sample_rate, fn, benign_keys), distance_on)
    d_adv = _output_distances(model, adversarial, _transform_rows(adversarial, ds.sample_rate, fn, adv_keys), distance_on)
    return DistancePair(benign=d_benign.tolist(), adversarial=d_adv.tolist())


def roc_auc(d: DistancePair) -> RocResult:
    """Adversarial is the positive class; larger distance means more suspicious."""
    scores = np.concatenate([d.benign, d.adversarial])
    truth = np.concatenate([np.zeros(len(d.benign)), np.ones(len(d.adversarial))])
    fpr, tpr, thresholds = roc_curve(truth, scores, drop_intermediate=False)
    # first threshold is +inf by construction
    thresholds = thresholds.astype(np.float64)
    thresholds[0] = float(scores.max()) + 1.0
    return RocResult(auc=float(auc(fpr, tpr)), fpr=fpr.tolist(), tpr=tpr.tolist(), thresholds=thresholds.tolist())


def defense_auc(
    model: SpectrogramClassifier,
    ds: Dataset,
    attack: AttackLike,
    transforms: Sequence[str],
    n_each: int,
    seed: int,
    snr_db: float = 10.0,
    distance_on: str = "softmax",
    band: Optional[Tuple[float, float]] = None,
    run_seed: Optional[int] = None,
) -> EvalReport:
    """AUC per transform; x is the transform's position in ``transforms``."""
    source = _as_source(attack)
    points, rocs = [], {}
    for i, name in enumerate(transforms):
        pair = transform_compare(model, ds, source, name, n_each, seed, snr_db, distance_on, band)
        roc = roc_auc(pair)
        rocs[name] = roc.model_dump()
        points.append(EvalPoint(x=float(i), metric=roc.auc, seed=run_seed))
        logger.info(f"defense_auc {source.tag} transform={name} auc={roc.auc:.3f}")
    return EvalReport(
        protocol="defense_auc",
        attack_tag=source.tag,
        model_tag="WB",
        x_name="transform_index",
        metric_name="auc",
        parameters={"transforms": list(transforms), "snr_db": snr_db, "n_each": n_each, "distance_on": distance_on},
        points=points,
        seeds=[] if run_seed is None else [run_seed],
        metadata={"roc": rocs},
    )


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

def spectrum_profile(
    ds: Dataset,
    attack: AttackLike,
    snr_db: float,
    cutoff_hz: float,
    run_seed: Optional[int] = None,
) -> EvalReport:
    """Mean one-sided |DFT| of adversarial inputs per frequency; benign mean and the
    attack's out-of-band power fraction ride along in metadata."""
    if len(ds) == 0:
        raise EvaluationError("spectrum_profile needs a nonempty dataset")
    source = _as_source(attack)
    adversarial = adversarial_signals(ds.signals, ds.labels, source, snr_db)
    freqs = np.fft.rfftfreq(ds.length, d=1.0 / ds.sample_rate)
    benign_mag = np.abs(np.fft.rfft(ds.signals, axis=1)).mean(axis=0)
    adv_mag = np.abs(np.fft.rfft(adversarial, axis=1)).mean(axis=0)
    perturbation = (adversarial - ds.signals)
    fractions = [
        out_of_band_fraction(TimeSeries(samples=row, sample_rate=ds.sample_rate), cutoff_hz)
        for row in perturbation
    ]
    oob = float(np.mean(fractions))
    logger.info(f"spectrum {source.tag}: out-of-band fraction above {cutoff_hz:.0f} Hz = {oob:.4f}")
    return EvalReport(
        protocol="spectrum",
        attack_tag=source.tag,
        model_tag="NA",
        x_name="frequency_hz",
        metric_name="magnitude",
        parameters={"snr_db": snr_db, "cutoff_hz": cutoff_hz},
        points=[EvalPoint(x=float(f), metric=float(m), seed=run_seed) for f, m in zip(freqs, adv_mag)],
        seeds=[] if run_seed is None else [run_seed],
        metadata={"benign_magnitude": benign_mag.tolist(), "out_of_band_fraction": oob},
    )


# ---------------------------------------------------------------------------
# Character error rate
# ---------------------------------------------------------------------------

def cer(reference: str, hypothesis: str) -> float:
    """(substitutions + deletions + insertions) / len(reference), by Levenshtein alignment."""
    if not reference:
        raise EvaluationError("CER needs a nonempty reference")
    n, m = len(reference), len(hypothesis)
    previous = np.arange(m + 1)
    for i in range(1, n + 1):
        current = np.empty(m + 1, dtype=np.int64)
        current[0] = i
        for j in range(1, m + 1):
            substitution = previous[j - 1] + (reference[i - 1] != hypothesis[j - 1])
            current[j] = min(previous[j] + 1, current[j - 1] + 1, substitution)
        previous = current
    return float(previous[m]) / n


# ---------------------------------------------------------------------------
# Aggregation and report files
# ---------------------------------------------------------------------------

def _aggregate(
    protocol: str,
    attack_tag: str,
    model_tag: str,
    x_name: str,
    metric_name: str,
    xs: Sequence[float],
    runs: Dict[int, List[float]],
    parameters: dict,
    metadata: Optional[dict] = None,
) -> EvalReport:
    matrix = np.array([runs[s] for s in runs], dtype=np.float64)
    points = [
        EvalPoint(x=float(x), metric=float(matrix[:, j].mean()), std=float(matrix[:, j].std()))
        for j, x in enumerate(xs)
    ]
    return EvalReport(
        protocol=protocol,
        attack_tag=attack_tag,
        model_tag=model_tag,
        x_name=x_name,
        metric_name=metric_name,
        parameters=parameters,
        points=points,
        seeds=list(runs),
        metadata={**(metadata or {}), "per_seed": {str(s): list(v) for s, v in runs.items()}},
    )


def aggregate_reports(reports: Sequence[EvalReport]) -> EvalReport:
    """Mean and std per grid point over reports that differ only by run seed."""
    if not reports:
        raise EvaluationError("nothing to aggregate")
    first = reports[0]
    xs = [p.x for p in first.points]
    runs: Dict[int, List[float]] = {}
    for i, report in enumerate(reports):
        if [p.x for p in report.points] != xs or report.protocol != first.protocol:
            raise EvaluationError(f"{report.protocol}/{report.attack_tag}: reports cover different grids")
        seed = report.seeds[0] if report.seeds else i
        runs[seed] = [p.metric for p in report.points]
    merged_meta = {k: v for k, v in first.metadata.items() if k != "per_seed"}
    if len(reports) > 1:
        merged_meta["per_seed_metadata"] = {
            str(r.seeds[0] if r.seeds else i): r.metadata for i, r in enumerate(reports)
        }
    return _aggregate(
        protocol=first.protocol,
        attack_tag=first.attack_tag,
        model_tag=first.model_tag,
        x_name=first.x_name,
        metric_name=first.metric_name,
        xs=xs,
        runs=runs,
        parameters=first.parameters,
        metadata=merged_meta,
    )


def report_frame(report: EvalReport) -> pd.DataFrame:
    """One row per (grid point, seed), plus the mean row (seed 'mean')."""
    rows = []
    per_seed = report.metadata.get("per_seed") or {}
    for seed, values in per_seed.items():
        for p, value in zip(report.points, values):
            rows.append((report.protocol, report.attack_tag, report.model_tag, p.x, value, seed, report.config_hash))
    for p in report.points:
        seed = "mean" if per_seed else ("" if p.seed is None else str(p.seed))
        rows.append((report.protocol, report.attack_tag, report.model_tag, p.x, p.metric, seed, report.config_hash))
    return pd.DataFrame(rows, columns=["protocol", "attack_tag", "model_tag", "x", "metric", "seed", "config_hash"])


def save_report(report: EvalReport, json_path, csv_path=None):
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(report.model_dump_json(indent=2))
    if csv_path is not None:
        report_frame(report).to_csv(csv_path, index=False)


def load_report(path) -> EvalReport:
    path = Path(path)
    try:
        return EvalReport.model_validate_json(path.read_text())
    except ValueError as e:
        raise EvaluationError(f"{path}: invalid report: {e}")
