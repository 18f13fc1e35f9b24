# services/report_service.py
"""Consolidation of per-protocol reports into summary.csv / summary.json,
including the qualitative reproduction checks."""
from typing import Any, Dict, List, Optional
import json
import logging

import numpy as np
import pandas as pd

from app.errors import HashMismatchError, MissingArtifactError
from app.schemas.attack import AttackTag
from app.schemas.evaluation import EvalReport
from app.services.eval_service import load_report, report_frame
from app.utils import ArtifactPaths

logger = logging.getLogger(__name__)

FOURIER = AttackTag.FFT.value


def collect_reports(paths: ArtifactPaths, cfg_hash: str) -> List[EvalReport]:
    """Every report under ``reports/``; all must carry ``cfg_hash``."""
    files = sorted(paths.reports_dir.glob("*.json")) if paths.reports_dir.exists() else []
    if not files:
        raise MissingArtifactError(paths.reports_dir, "eval")
    reports = []
    for path in files:
        report = load_report(path)
        if report.config_hash != cfg_hash:
            raise HashMismatchError(f"{path} was produced by config {report.config_hash}, expected {cfg_hash}")
        reports.append(report)
    return reports


def _find(reports: List[EvalReport], protocol: str, attack_tag: str, model_tag: Optional[str] = None) -> Optional[EvalReport]:
    for r in reports:
        if r.protocol == protocol and r.attack_tag == attack_tag and (model_tag is None or r.model_tag == model_tag):
            return r
    return None


def _per_seed(report: EvalReport) -> Dict[str, np.ndarray]:
    per_seed = report.metadata.get("per_seed")
    if per_seed:
        return {s: np.asarray(v, dtype=np.float64) for s, v in per_seed.items()}
    return {"0": np.array([p.metric for p in report.points])}


def _majority(passes: List[bool]) -> bool:
    return sum(passes) * 2 > len(passes)


def _verdict(passes: List[bool], details: Dict[str, Any]) -> Dict[str, Any]:
    return {"status": "pass" if _majority(passes) else "fail", "per_seed": passes, **details}


def _skipped(reason: str) -> Dict[str, Any]:
    return {"status": "skipped", "reason": reason}


def check_attack_effectiveness(reports: List[EvalReport], snr_db: float = 10.0) -> Dict[str, Any]:
    """White-box ASR >= 0.2 at 10 dB; black-box ASR in (0, white-box]."""
    wb = _find(reports, "asr_snr", FOURIER, "WB")
    bb = _find(reports, "asr_snr", FOURIER, "BB")
    if wb is None or bb is None:
        return _skipped("asr_snr reports for fft WB/BB missing")
    xs = [p.x for p in wb.points]
    if snr_db not in xs:
        return _skipped(f"snr grid lacks {snr_db} dB")
    j = xs.index(snr_db)
    wb_runs, bb_runs = _per_seed(wb), _per_seed(bb)
    passes = []
    for seed, wb_values in wb_runs.items():
        bb_values = bb_runs.get(seed)
        if bb_values is None:
            continue
        passes.append(bool(wb_values[j] >= 0.2 and 0 < bb_values[j] <= wb_values[j]))
    return _verdict(passes, {"wb_asr": wb.points[j].metric, "bb_asr": bb.points[j].metric})


def _ratios(report: EvalReport, num_index: int, den_index: int) -> Dict[str, Optional[float]]:
    """Per-seed ASR ratio; None when the reference ASR is zero."""
    out: Dict[str, Optional[float]] = {}
    for seed, values in _per_seed(report).items():
        den = values[den_index]
        out[seed] = float(values[num_index] / den) if den > 0 else None
    return out


def _undefined(ratios: Dict[str, Optional[float]], tag: str, reference: str) -> List[str]:
    return [f"{tag} seed {s}: {reference} ASR is 0, ratio undefined" for s, r in ratios.items() if r is None]


def check_time_invariance(reports: List[EvalReport]) -> Dict[str, Any]:
    """Min-over-shifts ASR >= 0.8 x shift-0 ASR; the no-time-shift ablation <= 0.6 x."""
    trained = _find(reports, "time_shift", FOURIER)
    ablation = _find(reports, "time_shift", AttackTag.FFT_NO_TIMESHIFT.value)
    if trained is None or ablation is None:
        return _skipped("time_shift reports for fft and fft_no_timeshift missing")

    def min_over_first(report):
        return {s: float(v.min() / v[0]) if v[0] > 0 else None for s, v in _per_seed(report).items()}

    trained_ratio, ablation_ratio = min_over_first(trained), min_over_first(ablation)
    passes = [
        trained_ratio[s] is not None
        and ablation_ratio[s] is not None
        and trained_ratio[s] >= 0.8
        and ablation_ratio[s] <= 0.6
        for s in trained_ratio if s in ablation_ratio
    ]
    notes = _undefined(trained_ratio, FOURIER, "shift-0") + _undefined(
        ablation_ratio, AttackTag.FFT_NO_TIMESHIFT.value, "shift-0"
    )
    return _verdict(passes, {"trained_ratio": trained_ratio, "ablation_ratio": ablation_ratio, "undefined": notes})


def check_filtering(reports: List[EvalReport]) -> Dict[str, Any]:
    """At the band-edge cutoff the constrained attack keeps >= 70% of its Nyquist ASR;
    the no-spectrum-loss ablation keeps <= 60%."""
    constrained = _find(reports, "filtering", FOURIER)
    ablation = _find(reports, "filtering", AttackTag.FFT_NO_SPECTRUM_LOSS.value)
    if constrained is None or ablation is None:
        return _skipped("filtering reports for fft and fft_no_spectrum_loss missing")
    edge = constrained.parameters.get("band_edge_hz")
    xs = [p.x for p in constrained.points]
    if edge is None or edge not in xs:
        return _skipped("cutoff grid lacks the band edge")
    low, high = xs.index(edge), len(xs) - 1
    kept, dropped = _ratios(constrained, low, high), _ratios(ablation, low, high)
    passes = [
        kept[s] is not None and dropped[s] is not None and kept[s] >= 0.7 and dropped[s] <= 0.6
        for s in kept if s in dropped
    ]
    notes = _undefined(kept, FOURIER, "Nyquist-cutoff") + _undefined(
        dropped, AttackTag.FFT_NO_SPECTRUM_LOSS.value, "Nyquist-cutoff"
    )
    return _verdict(passes, {"constrained_retention": kept, "ablation_retention": dropped, "undefined": notes})


def check_defense_ordering(reports: List[EvalReport]) -> Dict[str, Any]:
    """Mean AUC over transforms: Fourier < UAP, Fourier < FGSM, Fourier <= 0.70."""
    fourier = _find(reports, "defense_auc", FOURIER)
    uap = _find(reports, "defense_auc", AttackTag.UAP.value)
    fgsm = _find(reports, "defense_auc", AttackTag.FGSM.value)
    if fourier is None or uap is None or fgsm is None:
        return _skipped("defense_auc reports for fft, uap and fgsm missing")
    fgsm_mean = float(np.mean([p.metric for p in fgsm.points]))
    uap_runs = {s: float(v.mean()) for s, v in _per_seed(uap).items()}
    passes = []
    means = {}
    for seed, values in _per_seed(fourier).items():
        means[seed] = float(values.mean())
        uap_mean = uap_runs.get(seed, float(np.mean(list(uap_runs.values()))))
        passes.append(means[seed] < uap_mean and means[seed] < fgsm_mean and means[seed] <= 0.70)
    return _verdict(passes, {"fourier_mean_auc": means, "uap_mean_auc": uap_runs, "fgsm_mean_auc": fgsm_mean})


def summarize(reports: List[EvalReport]) -> Dict[str, Any]:
    protocols: Dict[str, Dict[str, Any]] = {}
    for r in sorted(reports, key=lambda r: (r.protocol, r.attack_tag, r.model_tag)):
        entry = {
            "x_name": r.x_name,
            "metric_name": r.metric_name,
            "x": [p.x for p in r.points],
            "mean": [p.metric for p in r.points],
            "std": [p.std for p in r.points],
            "seeds": r.seeds,
        }
        if r.protocol == "spectrum":
            runs = r.metadata.get("per_seed_metadata") or {"": r.metadata}
            fractions = [m.get("out_of_band_fraction", 0.0) for m in runs.values()]
            entry = {"out_of_band_fraction": float(np.mean(fractions)), "seeds": r.seeds}
        if r.protocol == "defense_auc":
            entry["transforms"] = r.parameters.get("transforms")
        protocols.setdefault(r.protocol, {})[f"{r.attack_tag}/{r.model_tag}"] = entry
    return protocols


def write_summary(paths: ArtifactPaths, cfg_hash: str) -> Dict[str, Any]:
    """Write summary.csv (all rows of every report) and summary.json."""
    reports = collect_reports(paths, cfg_hash)
    frame = pd.concat([report_frame(r) for r in reports], ignore_index=True)
    frame = frame.sort_values(["protocol", "attack_tag", "model_tag", "seed", "x"], kind="mergesort")
    frame.to_csv(paths.consolidated_csv, index=False)

    summary = {
        "config_hash": cfg_hash,
        "protocols": summarize(reports),
        "acceptance": {
            "attack_effectiveness": check_attack_effectiveness(reports),
            "time_invariance": check_time_invariance(reports),
            "filtering": check_filtering(reports),
            "defense_ordering": check_defense_ordering(reports),
        },
    }
    paths.summary.write_text(json.dumps(summary, indent=2, sort_keys=True))
    for name, verdict in summary["acceptance"].items():
        logger.info(f"check {name}: {verdict['status']}")
    return summary
