# services/attack_service.py
"""Attack synthesis: the universal frequency-constrained Fourier attack and the
FGSM, UAP and Gaussian-noise baselines."""
from typing import Optional, Sequence, Tuple
import logging

import numpy as np
import torch
import torch.nn.functional as F

from app.errors import AttackError
from app.models.classifier import SpectrogramClassifier
from app.models.constant import ATTACK_MAGIC, ATTACK_VERSION, SPECTRUM_EPS
from app.schemas.attack import AttackTag, AttackVector, FourierAttackConfig, UapConfig
from app.schemas.data import Dataset, LabeledSignal
from app.schemas.signal import Spectrum, TimeSeries
from app.services.classifier_service import grad_input_batch, predict
from app.services.signal_service import cyclic_time_shift, dft, full_spectrum_from_half, shift_phase_factors
from app.utils import check_artifact_hash, float_block, progress, read_container, require_header_field, write_container

logger = logging.getLogger(__name__)

# floor for |DFT(x + v)| inside the log-scale loss
_LOG_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# Spectrum losses
# ---------------------------------------------------------------------------

def phase1_penalty(x_mag: torch.Tensor, xv_mag: torch.Tensor, cap: float = 2.0) -> torch.Tensor:
    """sum_k ReLU(|XV[k]| - cap * |X[k]|) over every leading axis as well."""
    return torch.relu(xv_mag - cap * x_mag).sum()


def phase2_penalty(x_mag: torch.Tensor, xv_mag: torch.Tensor, cap: float = 2.0) -> torch.Tensor:
    """sum_k ReLU(20 log10(|XV[k]| / (cap * |X[k]|))), skipping bins with |X[k]| < eps."""
    included = x_mag >= SPECTRUM_EPS
    ratio = xv_mag[included].clamp_min(_LOG_FLOOR) / (cap * x_mag[included])
    return torch.relu(20.0 * torch.log10(ratio)).sum()


def _magnitudes(x: TimeSeries, xv: TimeSeries) -> Tuple[torch.Tensor, torch.Tensor]:
    if x.length != xv.length:
        raise AttackError(f"length mismatch: {x.length} vs {xv.length}")
    x_mag = torch.from_numpy(np.abs(dft(x).coefficients))
    xv_mag = torch.from_numpy(np.abs(dft(xv).coefficients))
    return x_mag, xv_mag


def spectrum_loss_phase1(x: TimeSeries, xv: TimeSeries, cap: float = 2.0) -> float:
    return float(phase1_penalty(*_magnitudes(x, xv), cap=cap))


def spectrum_loss_phase2(x: TimeSeries, xv: TimeSeries, cap: float = 2.0) -> float:
    return float(phase2_penalty(*_magnitudes(x, xv), cap=cap))


def spectrum_violation_fraction(ds: Dataset, v: np.ndarray, cap: float = 2.0) -> float:
    """Share of (example, bin) pairs where |DFT(x + v)[k]| > cap * |DFT(x)[k]|."""
    x_mag = np.abs(np.fft.fft(ds.signals, axis=1))
    xv_mag = np.abs(np.fft.fft(ds.signals + v, axis=1))
    return float(np.mean(xv_mag > cap * x_mag))


# ---------------------------------------------------------------------------
# Universal Fourier attack
# ---------------------------------------------------------------------------

def symmetrize(v_freq: np.ndarray) -> np.ndarray:
    """Nearest conjugate-symmetric spectrum (real DC and Nyquist bins)."""
    T = v_freq.shape[0]
    mirrored = np.conj(v_freq[(-np.arange(T)) % T])
    sym = 0.5 * (v_freq + mirrored)
    return full_spectrum_from_half(sym[: T // 2 + 1], T)


def fourier_objective(
    model: SpectrogramClassifier,
    signals: torch.Tensor,
    labels: torch.Tensor,
    v_re: torch.Tensor,
    v_im: torch.Tensor,
    shifts: Sequence[float],
    beta: float,
    phase: int,
    cap: float = 2.0,
    x_mag: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """J = CE(y, f(x + Re(IDFT(shift(v))))) - beta * L_spectrum, summed over the batch.

    ``shifts`` are delays in samples, one per row. Returns (J, CE, L_spectrum).
    """
    T = signals.shape[-1]
    factors = torch.from_numpy(np.stack([shift_phase_factors(T, n) for n in shifts]))
    v_freq = torch.complex(v_re, v_im)
    v_time = torch.fft.ifft(v_freq[None, :] * factors, dim=-1).real
    xv = signals + v_time
    ce = F.cross_entropy(model(xv), labels, reduction="sum")
    if beta == 0:
        spec = torch.zeros((), dtype=ce.dtype)
    else:
        if x_mag is None:
            x_mag = torch.fft.fft(signals, dim=-1).abs()
        xv_mag = torch.fft.fft(xv, dim=-1).abs()
        spec = phase1_penalty(x_mag, xv_mag, cap) if phase == 1 else phase2_penalty(x_mag, xv_mag, cap)
    return ce - beta * spec, ce, spec


def _training_subset(train: Dataset, max_examples: Optional[int], rng: np.random.Generator) -> np.ndarray:
    index = rng.permutation(len(train))
    if max_examples is not None:
        index = index[:max_examples]
    return np.sort(index)


def _attack_vector(v_freq: np.ndarray, sample_rate: float, tag: AttackTag, config: dict, seed: int, history=None) -> AttackVector:
    v_freq = symmetrize(v_freq)
    return AttackVector(
        v_freq=Spectrum(coefficients=v_freq, sample_rate=sample_rate, real_signal=True),
        v_time=TimeSeries(samples=np.fft.ifft(v_freq).real, sample_rate=sample_rate),
        tag=tag,
        config=config,
        seed=seed,
        history=history or [],
    )


def fourier_tag(cfg: FourierAttackConfig) -> AttackTag:
    if cfg.beta == 0:
        return AttackTag.FFT_NO_SPECTRUM_LOSS
    if not cfg.time_shift:
        return AttackTag.FFT_NO_TIMESHIFT
    if cfg.phase1_fraction >= 1.0:
        return AttackTag.FFT_PHASE1_ONLY
    return AttackTag.FFT


def beta_at(cfg: FourierAttackConfig, fraction_done: float) -> float:
    """Spectrum weight once ``fraction_done`` (0..1) of the steps ran: linear ramp over the warm-up."""
    if cfg.beta_warmup == 0 or fraction_done >= cfg.beta_warmup:
        return cfg.beta
    return cfg.beta * fraction_done / cfg.beta_warmup


def step_size_at(cfg: FourierAttackConfig, T: int, fraction_done: float) -> float:
    """Frequency-domain step length: alpha * sqrt(T) annealed (cosine) to ``alpha_decay_to`` of it."""
    floor = cfg.alpha_decay_to
    scale = floor + (1.0 - floor) * 0.5 * (1.0 + np.cos(np.pi * fraction_done))
    return cfg.alpha * np.sqrt(T) * scale


def train_fourier_attack(
    model: SpectrogramClassifier,
    train: Dataset,
    cfg: FourierAttackConfig,
    tag: Optional[AttackTag] = None,
) -> AttackVector:
    """Gradient ascent on J over a zero-initialized spectrum with random cyclic shifts.

    Phase 1 (linear spectrum cap) runs for the first ``phase1_fraction`` of the
    epochs, phase 2 (log-scale cap) afterwards. Each step moves v along the
    normalized batch gradient; the step length follows ``step_size_at`` and the
    spectrum weight ``beta_at``. ``history`` holds the per-example mean J of
    every epoch.
    """
    if train.length != model.T:
        raise AttackError(f"dataset length {train.length} != model length {model.T}")
    tag = tag or fourier_tag(cfg)
    T, f_s = train.length, train.sample_rate
    rng = np.random.default_rng(cfg.seed)
    subset = _training_subset(train, cfg.max_examples, rng)
    signals = torch.from_numpy(train.signals[subset])
    labels = torch.from_numpy(train.labels[subset])
    x_mag_all = torch.fft.fft(signals, dim=-1).abs()

    v_freq = np.zeros(T, dtype=np.complex128)
    phase1_epochs = cfg.phase1_fraction * cfg.epochs
    steps_per_epoch = -(-subset.size // cfg.batch_size)
    total_steps = max(cfg.epochs * steps_per_epoch, 1)
    step = 0
    history = []

    for epoch in range(cfg.epochs):
        phase = 1 if epoch < phase1_epochs else 2
        order = rng.permutation(subset.size)
        total = 0.0
        for start in progress(range(0, subset.size, cfg.batch_size), desc=f"attack epoch {epoch}"):
            rows = order[start: start + cfg.batch_size]
            done = step / total_steps
            if cfg.time_shift:
                shifts = rng.uniform(0.0, T / f_s, size=rows.size) * f_s
            else:
                shifts = np.zeros(rows.size)
            v_re = torch.tensor(v_freq.real, requires_grad=True)
            v_im = torch.tensor(v_freq.imag, requires_grad=True)
            J, _, _ = fourier_objective(
                model,
                signals[rows],
                labels[rows],
                v_re,
                v_im,
                shifts,
                beta=beta_at(cfg, done),
                phase=phase,
                cap=cfg.cap,
                x_mag=x_mag_all[rows],
            )
            if not torch.isfinite(J):
                raise AttackError(f"non-finite objective at epoch {epoch}, example {int(subset[rows[0]])}")
            g_re, g_im = torch.autograd.grad(J, (v_re, v_im))
            grad = g_re.numpy() + 1j * g_im.numpy()
            norm = np.sqrt(np.sum(np.abs(grad) ** 2))
            if norm > 0:
                v_freq = symmetrize(v_freq + step_size_at(cfg, T, done) * grad / norm)
            total += J.item()
            step += 1

        history.append(total / subset.size)
        logger.info(
            f"{tag.value} epoch {epoch + 1}/{cfg.epochs} phase={phase} "
            f"beta={beta_at(cfg, step / total_steps):.4g} mean_J={history[-1]:.4f}"
        )

    return _attack_vector(v_freq, f_s, tag, cfg.model_dump(), cfg.seed, history)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def fgsm(model: SpectrogramClassifier, x: TimeSeries, label: int, epsilon: float) -> TimeSeries:
    """Per-input perturbation epsilon * sign(d CE / d x)."""
    grad = grad_input_batch(model, x.samples[None, :], np.array([label]))[0]
    return x.with_samples(epsilon * np.sign(grad))


def train_uap(
    model: SpectrogramClassifier,
    train: Dataset,
    epochs: int,
    step: float,
    norm_budget: float,
    seed: int,
    max_examples: Optional[int] = None,
) -> AttackVector:
    """Universal perturbation by normalized gradient steps on still-correct examples,
    projected onto the L2 ball of radius ``norm_budget``."""
    if train.length != model.T:
        raise AttackError(f"dataset length {train.length} != model length {model.T}")
    rng = np.random.default_rng(seed)
    subset = _training_subset(train, max_examples, rng)
    v = np.zeros(train.length)
    history = []
    for epoch in range(epochs):
        for i in progress(rng.permutation(subset), desc=f"uap epoch {epoch}"):
            x, y = train.signals[i], train.labels[i]
            if predict(model, (x + v)[None, :])[0] != y:
                continue
            grad = grad_input_batch(model, (x + v)[None, :], np.array([y]))[0]
            norm = np.linalg.norm(grad)
            if norm == 0:
                continue
            v = v + step * grad / norm
            v_norm = np.linalg.norm(v)
            if v_norm > norm_budget:
                v *= norm_budget / v_norm
        fooled = float(np.mean(predict(model, train.signals[subset] + v) != train.labels[subset]))
        history.append(fooled)
        logger.info(f"uap epoch {epoch + 1}/{epochs} fooling_rate={fooled:.3f} norm={np.linalg.norm(v):.3f}")

    config = UapConfig(epochs=epochs, step=step, norm_budget=norm_budget, seed=seed, max_examples=max_examples)
    v_freq = dft(TimeSeries(samples=v, sample_rate=train.sample_rate)).coefficients
    return _attack_vector(v_freq, train.sample_rate, AttackTag.UAP, config.model_dump(), seed, history)


def gaussian_noise_attack(T: int, f_s: float, seed: int) -> AttackVector:
    """Unit-variance white Gaussian vector; amplitude is set later by SNR scaling."""
    if T < 1:
        raise AttackError(f"T must be positive, got {T}")
    v = np.random.default_rng(seed).standard_normal(T)
    v_freq = dft(TimeSeries(samples=v, sample_rate=f_s)).coefficients
    return _attack_vector(v_freq, f_s, AttackTag.NOISE, {"T": T, "f_s": f_s}, seed)


# ---------------------------------------------------------------------------
# Attack sources: one interface for universal vectors and per-input FGSM
# ---------------------------------------------------------------------------

class AttackSource:
    tag: str = ""
    universal: bool = True

    def perturbations(self, signals: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Unscaled perturbation per row (N x T)."""
        raise NotImplementedError

    def perturbation(self, item: LabeledSignal) -> np.ndarray:
        return self.perturbations(item.signal.samples[None, :], np.array([item.label]))[0]


class UniversalSource(AttackSource):
    def __init__(self, attack: AttackVector, shift_seconds: float = 0.0):
        self.attack = attack
        self.tag = attack.tag.value
        self.shift_seconds = shift_seconds
        if shift_seconds == 0.0:
            self.vector = attack.v_time.samples
        else:
            shifted = cyclic_time_shift(attack.v_freq, shift_seconds)
            self.vector = np.fft.ifft(shifted.coefficients).real

    def shifted(self, shift_seconds: float) -> "UniversalSource":
        return UniversalSource(self.attack, shift_seconds)

    def perturbations(self, signals: np.ndarray, labels: np.ndarray) -> np.ndarray:
        if signals.shape[-1] != self.vector.shape[0]:
            raise AttackError(f"attack length {self.vector.shape[0]} != signal length {signals.shape[-1]}")
        return np.broadcast_to(self.vector, signals.shape)


class FgsmSource(AttackSource):
    """FGSM computed per input against a fixed (white-box) model."""

    universal = False

    def __init__(self, model: SpectrogramClassifier, epsilon: float):
        self.model = model
        self.epsilon = epsilon
        self.tag = AttackTag.FGSM.value

    def perturbations(self, signals: np.ndarray, labels: np.ndarray) -> np.ndarray:
        chunks = []
        for start in range(0, signals.shape[0], 128):
            grad = grad_input_batch(self.model, signals[start: start + 128], labels[start: start + 128])
            chunks.append(self.epsilon * np.sign(grad))
        if not chunks:
            return np.zeros_like(signals)
        return np.concatenate(chunks)


# ---------------------------------------------------------------------------
# Attack files
# ---------------------------------------------------------------------------

def save_attack(attack: AttackVector, path, config_hash: str = ""):
    header = {
        "version": ATTACK_VERSION,
        "tag": attack.tag.value,
        "T": attack.length,
        "f_s": attack.sample_rate,
        "config": attack.config,
        "seed": attack.seed,
        "history": attack.history,
        "config_hash": config_hash,
    }
    interleaved = np.empty(2 * attack.length)
    interleaved[0::2] = attack.v_freq.coefficients.real
    interleaved[1::2] = attack.v_freq.coefficients.imag
    write_container(path, ATTACK_MAGIC, header, interleaved.astype("<f8").tobytes())


def load_attack(path, expected_hash: Optional[str] = None) -> AttackVector:
    header, payload = read_container(path, ATTACK_MAGIC, AttackError)
    if expected_hash:
        check_artifact_hash(header, expected_hash, path)
    version = require_header_field(header, "version", path, AttackError)
    if version != ATTACK_VERSION:
        raise AttackError(f"{path}: header field 'version' is {version}, expected {ATTACK_VERSION}")
    T = require_header_field(header, "T", path, AttackError)
    try:
        tag = AttackTag(require_header_field(header, "tag", path, AttackError))
    except ValueError:
        raise AttackError(f"{path}: header field 'tag' has unknown value {header.get('tag')!r}")
    if len(payload) != 2 * T * 8:
        raise AttackError(f"{path}: truncated v_freq block ({len(payload)} bytes, expected {2 * T * 8})")
    block = float_block(payload, 2 * T, path, "v_freq", AttackError)
    return _attack_vector(
        block[0::2] + 1j * block[1::2],
        require_header_field(header, "f_s", path, AttackError),
        tag,
        header.get("config", {}),
        header.get("seed", 0),
        header.get("history", []),
    )
