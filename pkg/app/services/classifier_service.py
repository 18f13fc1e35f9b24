# services/classifier_service.py
"""Training, inference and exact gradients for the spectrogram classifier."""
from typing import Optional, Tuple
import logging
import time

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import logsumexp

from app.errors import CheckpointError, ModelError
from app.models.classifier import SpectrogramClassifier
from app.models.constant import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from app.schemas.classifier import ArchitectureSpec, AugmentConfig, StftConfig, TrainLog
from app.schemas.data import Dataset
from app.schemas.signal import Spectrogram, TimeSeries
from app.services.signal_service import stft_samples
from app.utils import check_artifact_hash, float_block, progress, read_container, require_header_field, write_container

logger = logging.getLogger(__name__)

INFERENCE_BATCH = 256


def build_classifier(
    arch: ArchitectureSpec,
    stft: StftConfig,
    num_classes: int,
    T: int,
    seed: int = 0,
    zero_init_head: bool = False,
) -> SpectrogramClassifier:
    return SpectrogramClassifier(arch, stft, num_classes, T, seed=seed, zero_init_head=zero_init_head)


def _as_tensor(samples) -> torch.Tensor:
    return torch.as_tensor(np.asarray(samples, dtype=np.float64))


def _check_length(model: SpectrogramClassifier, T: int):
    if T != model.T:
        raise ModelError(f"input length {T} != model length {model.T}")


def forward(model: SpectrogramClassifier, x: TimeSeries) -> np.ndarray:
    """Logits (length C) for one signal."""
    _check_length(model, x.length)
    with torch.no_grad():
        return model(_as_tensor(x.samples)[None, :])[0].numpy()


def logits_batch(model: SpectrogramClassifier, signals: np.ndarray) -> np.ndarray:
    signals = np.atleast_2d(signals)
    _check_length(model, signals.shape[-1])
    outputs = []
    with torch.no_grad():
        for start in range(0, signals.shape[0], INFERENCE_BATCH):
            outputs.append(model(_as_tensor(signals[start: start + INFERENCE_BATCH])).numpy())
    if not outputs:
        return np.zeros((0, model.num_classes))
    return np.concatenate(outputs)


def softmax_outputs(model: SpectrogramClassifier, signals: np.ndarray) -> np.ndarray:
    logits = logits_batch(model, signals)
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def predict(model: SpectrogramClassifier, signals: np.ndarray) -> np.ndarray:
    return np.argmax(logits_batch(model, signals), axis=1)


def accuracy(model: SpectrogramClassifier, ds: Dataset) -> float:
    if len(ds) == 0:
        raise ModelError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(model, ds.signals) == ds.labels))


def loss_ce(logits, label: int) -> float:
    """-log softmax(logits)[label]."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise ModelError(f"label {label} outside [0, {logits.shape[-1]})")
    return float(logsumexp(logits) - logits[label])


def grad_input_batch(model: SpectrogramClassifier, signals: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d CE / d x for each row, exact reverse mode through STFT and network."""
    signals = np.atleast_2d(signals)
    _check_length(model, signals.shape[-1])
    x = _as_tensor(signals).clone().requires_grad_(True)
    loss = F.cross_entropy(model(x), torch.as_tensor(np.asarray(labels, dtype=np.int64)), reduction="sum")
    (grad,) = torch.autograd.grad(loss, x)
    return grad.numpy()


def grad_input(model: SpectrogramClassifier, x: TimeSeries, label: int) -> np.ndarray:
    return grad_input_batch(model, x.samples[None, :], np.array([label]))[0]


def batch_loss(model: SpectrogramClassifier, signals: np.ndarray, labels: np.ndarray) -> float:
    """Summed cross-entropy over a batch."""
    with torch.no_grad():
        logits = model(_as_tensor(np.atleast_2d(signals)))
        return float(F.cross_entropy(logits, torch.as_tensor(np.asarray(labels, dtype=np.int64)), reduction="sum"))


def grad_params(model: SpectrogramClassifier, signals: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Flat gradient of the summed cross-entropy w.r.t. every parameter."""
    signals = np.atleast_2d(signals)
    _check_length(model, signals.shape[-1])
    model.zero_grad(set_to_none=True)
    params = list(model.parameters())
    loss = F.cross_entropy(model(_as_tensor(signals)), torch.as_tensor(np.asarray(labels, dtype=np.int64)), reduction="sum")
    grads = torch.autograd.grad(loss, params)
    return torch.cat([g.reshape(-1) for g in grads]).numpy()


def augment(x: TimeSeries, spec: Spectrogram, cfg: AugmentConfig, seed: int) -> Spectrogram:
    """Time-domain Gaussian noise (before the STFT), then one time mask and one frequency mask."""
    if not cfg.enabled:
        return spec
    rng = np.random.default_rng(seed)
    if cfg.noise_std > 0:
        noisy = x.samples + rng.normal(0.0, cfg.noise_std, size=x.length)
        data = stft_samples(noisy, spec.fft_len, spec.hop)
    else:
        data = spec.data.copy()

    n_bins, n_windows = data.shape[1], data.shape[2]
    if cfg.time_mask_max >= n_windows or cfg.freq_mask_max >= n_bins:
        raise ModelError(
            f"mask sizes ({cfg.time_mask_max} windows, {cfg.freq_mask_max} bins) must be "
            f"smaller than the spectrogram ({n_windows} windows, {n_bins} bins)"
        )
    if cfg.time_mask_max > 0:
        width = int(rng.integers(0, cfg.time_mask_max + 1))
        start = int(rng.integers(0, n_windows - width + 1))
        data[:, :, start: start + width] = 0.0
    if cfg.freq_mask_max > 0:
        width = int(rng.integers(0, cfg.freq_mask_max + 1))
        start = int(rng.integers(0, n_bins - width + 1))
        data[:, start: start + width, :] = 0.0
    return Spectrogram(data=data, fft_len=spec.fft_len, hop=spec.hop)


def _batch_spectrograms(ds: Dataset, index: np.ndarray, stft: StftConfig, aug: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    clean = stft_samples(ds.signals[index], stft.fft_len, stft.hop)
    if not aug.enabled:
        return clean
    seeds = rng.integers(0, 2 ** 31 - 1, size=index.size)
    out = np.empty_like(clean)
    for j, i in enumerate(index):
        spec = Spectrogram(data=clean[j], fft_len=stft.fft_len, hop=stft.hop)
        out[j] = augment(ds.item(int(i)).signal, spec, aug, int(seeds[j])).data
    return out


def train_classifier(
    train: Dataset,
    val: Dataset,
    epochs: int,
    lr: float,
    aug: AugmentConfig,
    seed: int,
    arch: Optional[ArchitectureSpec] = None,
    stft: Optional[StftConfig] = None,
    momentum: float = 0.9,
    batch_size: int = 32,
) -> Tuple[SpectrogramClassifier, TrainLog]:
    """Mini-batch SGD with momentum; returns the parameters with the best validation accuracy."""
    arch = arch or ArchitectureSpec()
    stft = stft or StftConfig()
    if train.length != val.length or train.sample_rate != val.sample_rate or train.num_classes != val.num_classes:
        raise ModelError("train and val datasets are incompatible (T, f_s or class count differ)")
    if len(train) == 0 or len(val) == 0:
        raise ModelError("train and val datasets must be nonempty")

    model = build_classifier(arch, stft, train.num_classes, train.length, seed=seed)
    log = TrainLog()
    if epochs == 0:
        return model, log

    rng = np.random.default_rng(seed)
    optimizer = torch.optim.SGD(model.parameters(), lr=lr, momentum=momentum)
    labels_t = torch.as_tensor(train.labels)
    best_params = model.parameter_vector()
    best_val = -1.0

    for epoch in range(epochs):
        started = time.perf_counter()
        order = rng.permutation(len(train))
        total_loss = 0.0
        for start in progress(range(0, len(train), batch_size), desc=f"epoch {epoch}"):
            index = order[start: start + batch_size]
            specs = torch.as_tensor(_batch_spectrograms(train, index, stft, aug, rng))
            optimizer.zero_grad(set_to_none=True)
            loss = F.cross_entropy(model.body(specs), labels_t[index])
            if not torch.isfinite(loss):
                raise ModelError(f"training diverged at epoch {epoch}: loss {loss.item()}")
            loss.backward()
            optimizer.step()
            total_loss += loss.item() * index.size

        train_acc = accuracy(model, train)
        val_acc = accuracy(model, val)
        log.train_loss.append(total_loss / len(train))
        log.train_accuracy.append(train_acc)
        log.val_accuracy.append(val_acc)
        log.wall_time.append(time.perf_counter() - started)
        logger.info(
            f"epoch {epoch + 1}/{epochs} loss={log.train_loss[-1]:.4f} "
            f"train_acc={train_acc:.3f} val_acc={val_acc:.3f}"
        )
        if val_acc > best_val:
            best_val = val_acc
            best_params = model.parameter_vector()
            log.best_epoch = epoch

    model.load_parameter_vector(best_params)
    return model, log


def save_checkpoint(model: SpectrogramClassifier, path, config_hash: str = ""):
    header = {"version": CHECKPOINT_VERSION, "config_hash": config_hash, **model.descriptor()}
    payload = model.parameter_vector().numpy().astype("<f8").tobytes()
    write_container(path, CHECKPOINT_MAGIC, header, payload)


def load_checkpoint(
    path,
    expected_arch: Optional[ArchitectureSpec] = None,
    expected_hash: Optional[str] = None,
) -> SpectrogramClassifier:
    header, payload = read_container(path, CHECKPOINT_MAGIC, CheckpointError)
    if expected_hash:
        check_artifact_hash(header, expected_hash, path)
    version = require_header_field(header, "version", path)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: header field 'version' is {version}, expected {CHECKPOINT_VERSION}")
    try:
        arch = ArchitectureSpec.model_validate(require_header_field(header, "architecture", path))
        stft = StftConfig.model_validate(require_header_field(header, "stft", path))
    except ValueError as e:
        raise CheckpointError(f"{path}: header field 'architecture'/'stft' invalid: {e}")
    if expected_arch is not None and arch != expected_arch:
        raise CheckpointError(f"{path}: header field 'architecture' {arch.model_dump()} != expected {expected_arch.model_dump()}")

    model = build_classifier(
        arch,
        stft,
        require_header_field(header, "num_classes", path),
        require_header_field(header, "T", path),
        seed=header.get("seed", 0),
    )
    count = sum(p.numel() for p in model.parameters())
    if header.get("param_count") != count:
        raise CheckpointError(f"{path}: header field 'param_count' {header.get('param_count')} != architecture's {count}")
    if len(payload) != count * 8:
        raise CheckpointError(f"{path}: truncated parameter block ({len(payload)} bytes, expected {count * 8})")
    model.load_parameter_vector(torch.from_numpy(float_block(payload, count, path, "parameters")))
    return model
