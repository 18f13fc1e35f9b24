# services/data_service.py
"""Labeled time-series datasets: synthetic multi-tone classes, WAV ingestion,
stratified splits and the binary dataset cache."""
from pathlib import Path
from typing import List, Optional, Tuple
import logging

import numpy as np
import soundfile as sf
from sklearn.model_selection import train_test_split

from app.errors import DataError, WavFormatError
from app.models.constant import DATASET_MAGIC, DATASET_VERSION
from app.schemas.data import Dataset, SynthConfig
from app.utils import check_artifact_hash, float_block, read_container, require_header_field, write_container

logger = logging.getLogger(__name__)

SUPPORTED_SUBTYPES = {"PCM_16", "PCM_32", "FLOAT"}

# independent random streams derived from the config seed
_TONE_STREAM = 0
_TRAIN_STREAM = 1
_VAL_STREAM = 2


def _stream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def draw_class_tones(cfg: SynthConfig) -> np.ndarray:
    """C x K tone frequencies (Hz), distinct across all classes, on DFT bin centers."""
    bin_hz = cfg.f_s / cfg.T
    spacing_bins = max(int(round(cfg.tone_spacing_hz / bin_hz)), 1)
    first = int(np.ceil(cfg.band_low_hz / bin_hz))
    last = int(np.floor(cfg.band_high_hz / bin_hz))
    grid = np.arange(first, last + 1, spacing_bins)
    needed = cfg.num_classes * cfg.tone_count_per_class
    if grid.size < needed:
        raise DataError(
            f"band [{cfg.band_low_hz}, {cfg.band_high_hz}] Hz holds {grid.size} tone slots "
            f"at {cfg.tone_spacing_hz} Hz spacing, {needed} needed"
        )
    rng = _stream(cfg.seed, _TONE_STREAM)
    chosen = rng.choice(grid, size=needed, replace=False)
    tones = np.sort(chosen.reshape(cfg.num_classes, cfg.tone_count_per_class), axis=1)
    return tones * bin_hz


def _render_split(cfg: SynthConfig, tones: np.ndarray, per_class: int, rng: np.random.Generator, split_tag: str) -> Dataset:
    t = np.arange(cfg.T) / cfg.f_s
    n_total = cfg.num_classes * per_class
    signals = np.zeros((n_total, cfg.T))
    labels = np.repeat(np.arange(cfg.num_classes), per_class)
    for i, label in enumerate(labels):
        freqs = tones[label]
        phases = rng.uniform(0.0, 2 * np.pi, size=freqs.size)
        amps = cfg.amplitude * (1.0 + cfg.amplitude_jitter * rng.uniform(-1.0, 1.0, size=freqs.size))
        signals[i] = np.sum(amps[:, None] * np.cos(2 * np.pi * freqs[:, None] * t + phases[:, None]), axis=0)
        if cfg.noise_std > 0:
            signals[i] += rng.normal(0.0, cfg.noise_std, size=cfg.T)
    return Dataset(
        signals=signals,
        labels=labels,
        num_classes=cfg.num_classes,
        sample_rate=cfg.f_s,
        split_tag=split_tag,
    )


def generate_synthetic(cfg: SynthConfig) -> Tuple[Dataset, Dataset]:
    """Train and validation sets; classes are fixed tone sets inside one shared band."""
    if cfg.band_high_hz > cfg.f_s / 2:
        raise DataError(f"band wider than Nyquist: band_high_hz={cfg.band_high_hz} > {cfg.f_s / 2}")
    tones = draw_class_tones(cfg)
    train = _render_split(cfg, tones, cfg.examples_per_class, _stream(cfg.seed, _TRAIN_STREAM), "train")
    val = _render_split(cfg, tones, cfg.val_examples_per_class, _stream(cfg.seed, _VAL_STREAM), "val")
    logger.info(
        f"Synthetic data: {cfg.num_classes} classes, {len(train)} train / {len(val)} val, "
        f"T={cfg.T}, f_s={cfg.f_s}"
    )
    return train, val


def _check_riff_header(path: Path):
    with open(path, "rb") as f:
        head = f.read(12)
    if len(head) < 12:
        raise WavFormatError(f"{path}: malformed header: file shorter than the 12-byte RIFF header")
    if head[0:4] != b"RIFF":
        raise WavFormatError(f"{path}: malformed header: chunk_id is {head[0:4]!r}, expected b'RIFF'")
    if head[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: malformed header: format is {head[8:12]!r}, expected b'WAVE'")


def read_wav(path, expected_rate: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """First channel of a PCM-16/PCM-32/float WAV file, scaled to [-1, 1]."""
    path = Path(path)
    _check_riff_header(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise WavFormatError(f"{path}: malformed header: {e}")
    if info.format != "WAV":
        raise WavFormatError(f"{path}: format field is {info.format}, expected WAV")
    if info.subtype not in SUPPORTED_SUBTYPES:
        raise WavFormatError(
            f"{path}: unsupported encoding {info.subtype}; expected one of {sorted(SUPPORTED_SUBTYPES)}"
        )
    if expected_rate is not None and info.samplerate != expected_rate:
        raise WavFormatError(f"{path}: sample_rate {info.samplerate} != expected {expected_rate}")
    samples, rate = sf.read(str(path), dtype="float64", always_2d=True)
    return np.clip(samples[:, 0], -1.0, 1.0), float(rate)


def load_wav_segments(
    path,
    segment_len_samples: int,
    max_segments: int,
    seed: int,
    label: int = 0,
    num_classes: int = 1,
    expected_rate: Optional[float] = None,
) -> Dataset:
    """Cut ``max_segments`` random-offset segments from one WAV file."""
    if segment_len_samples < 1 or max_segments < 1:
        raise DataError("segment_len_samples and max_segments must be positive")
    samples, rate = read_wav(path, expected_rate)
    if samples.size < segment_len_samples:
        raise DataError(f"{path}: {samples.size} samples is shorter than segment length {segment_len_samples}")
    rng = np.random.default_rng(seed)
    offsets = rng.integers(0, samples.size - segment_len_samples + 1, size=max_segments)
    segments = np.stack([samples[o: o + segment_len_samples] for o in offsets])
    return Dataset(
        signals=segments,
        labels=np.full(max_segments, label),
        num_classes=num_classes,
        sample_rate=rate,
    )


def load_wav_corpus(root, segment_len_samples: int, segments_per_file: int, seed: int) -> Dataset:
    """Walk ``root/<label>/*.wav``; sorted directory names become class indices."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"WAV corpus root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"{root}: no label directories found")
    signals: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    rate: Optional[float] = None
    for label, class_dir in enumerate(class_dirs):
        for file_index, wav_path in enumerate(sorted(class_dir.glob("*.wav"))):
            part = load_wav_segments(
                wav_path,
                segment_len_samples,
                segments_per_file,
                seed=seed * 1_000_003 + label * 10_007 + file_index,
                label=label,
                num_classes=len(class_dirs),
                expected_rate=rate,
            )
            rate = part.sample_rate
            signals.append(part.signals)
            labels.append(part.labels)
    if not signals:
        raise DataError(f"{root}: no .wav files found")
    ds = Dataset(
        signals=np.concatenate(signals),
        labels=np.concatenate(labels),
        num_classes=len(class_dirs),
        sample_rate=rate,
        class_names=[d.name for d in class_dirs],
    )
    logger.info(f"Loaded {len(ds)} WAV segments from {root} ({ds.num_classes} classes)")
    return ds


def split(ds: Dataset, fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Class-stratified split; ``fraction`` of each class goes to the first output."""
    if not 0 < fraction < 1:
        raise DataError(f"fraction must lie in (0, 1), got {fraction}")
    counts = np.bincount(ds.labels, minlength=ds.num_classes)
    singletons = np.flatnonzero(counts == 1)
    if singletons.size:
        raise DataError(f"class {singletons[0]} has 1 item(s); at least 2 needed to split")
    try:
        first, second = train_test_split(
            np.arange(len(ds)),
            train_size=fraction,
            random_state=seed,
            stratify=ds.labels,
        )
    except ValueError as e:
        raise DataError(f"cannot split {len(ds)} items at fraction {fraction}: {e}")
    a = ds.subset(np.sort(first)).model_copy(update={"split_tag": "train"})
    b = ds.subset(np.sort(second)).model_copy(update={"split_tag": "val"})
    return a, b


def save_dataset(ds: Dataset, path, config_hash: str = ""):
    header = {
        "version": DATASET_VERSION,
        "C": ds.num_classes,
        "T": ds.length,
        "f_s": ds.sample_rate,
        "count": len(ds),
        "split_tag": ds.split_tag,
        "class_names": ds.class_names,
        "config_hash": config_hash,
    }
    payload = ds.signals.astype("<f8").tobytes() + ds.labels.astype("<i4").tobytes()
    write_container(path, DATASET_MAGIC, header, payload)


def load_dataset(path, expected_hash: Optional[str] = None) -> Dataset:
    header, payload = read_container(path, DATASET_MAGIC, DataError)
    if expected_hash:
        check_artifact_hash(header, expected_hash, path)
    version = require_header_field(header, "version", path, DataError)
    if version != DATASET_VERSION:
        raise DataError(f"{path}: header field 'version' is {version}, expected {DATASET_VERSION}")
    C = require_header_field(header, "C", path, DataError)
    T = require_header_field(header, "T", path, DataError)
    f_s = require_header_field(header, "f_s", path, DataError)
    count = require_header_field(header, "count", path, DataError)
    signals = float_block(payload, count * T, path, "samples", DataError).reshape(count, T)
    label_bytes = payload[count * T * 8:]
    if len(label_bytes) != count * 4:
        raise DataError(f"{path}: payload field 'labels' holds {len(label_bytes)} bytes, expected {count * 4}")
    labels = np.frombuffer(label_bytes, dtype="<i4").astype(np.int64)
    return Dataset(
        signals=signals,
        labels=labels,
        num_classes=C,
        sample_rate=f_s,
        split_tag=header.get("split_tag", "train"),
        class_names=header.get("class_names"),
    )
