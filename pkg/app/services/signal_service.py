# services/signal_service.py
"""Deterministic numerical core: Fourier transforms, phase-rotation time shifts,
power/SNR arithmetic, FIR filters, STFT and the defense transforms.

Every public operation is a pure function of its inputs (plus explicit seeds).
Conventions: unnormalized forward DFT, 1/T inverse. Array-level helpers
(``*_samples``) work on the last axis so datasets can be processed as N x T
matrices.
"""
from typing import Optional, Tuple
import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage
from scipy import signal as sps

from app.errors import SignalError
from app.schemas.signal import Spectrogram, Spectrum, TimeSeries

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Fourier transforms
# ---------------------------------------------------------------------------

def full_spectrum_from_half(half: np.ndarray, T: int) -> np.ndarray:
    """Expand a one-sided rfft spectrum to all T bins with exact conjugate symmetry."""
    coeffs = np.empty(T, dtype=np.complex128)
    n_half = half.shape[0]
    coeffs[:n_half] = half
    coeffs[0] = half[0].real
    if T % 2 == 0:
        coeffs[T // 2] = half[T // 2].real
    k = np.arange(n_half, T)
    coeffs[n_half:] = np.conj(coeffs[T - k])
    return coeffs


def dft(x: TimeSeries) -> Spectrum:
    samples = np.asarray(x.samples, dtype=np.float64)
    if samples.size == 0:
        raise SignalError("empty signal")
    T = samples.shape[0]
    coeffs = full_spectrum_from_half(np.fft.rfft(samples), T)
    return Spectrum(coefficients=coeffs, sample_rate=x.sample_rate, real_signal=True)


def idft(s: Spectrum) -> np.ndarray:
    """Inverse DFT with 1/T normalization; returns complex samples (take the real part)."""
    coeffs = np.asarray(s.coefficients, dtype=np.complex128)
    if coeffs.size == 0:
        raise SignalError("empty spectrum")
    return np.fft.ifft(coeffs)


def real_part(z: np.ndarray, sample_rate: float) -> TimeSeries:
    return TimeSeries(samples=np.real(z), sample_rate=sample_rate)


def signed_bins(T: int) -> np.ndarray:
    """Signed frequency index per bin: k for k <= T/2, k - T above."""
    return np.fft.fftfreq(T, d=1.0 / T)


def shift_phase_factors(T: int, shift_samples: float) -> np.ndarray:
    """Per-bin factors delaying a signal by ``shift_samples`` (cyclically).

    The Nyquist bin of an even-length spectrum gets the real factor cos(pi*n)
    so real signals stay real; it is exact for whole-sample shifts.
    """
    n = math.fmod(float(shift_samples), T)
    k = signed_bins(T)
    factors = np.exp(-2j * np.pi * k * n / T)
    if T % 2 == 0:
        factors[T // 2] = math.cos(math.pi * n)
    return factors


def cyclic_time_shift(s: Spectrum, t: float) -> Spectrum:
    """Delay the signal behind ``s`` by ``t`` seconds, wrapping around its duration."""
    T = s.length
    factors = shift_phase_factors(T, t * s.sample_rate)
    return Spectrum(
        coefficients=s.coefficients * factors,
        sample_rate=s.sample_rate,
        real_signal=s.real_signal,
    )


def magnitude_spectrum(x: TimeSeries) -> Tuple[np.ndarray, np.ndarray]:
    """One-sided (frequencies in Hz, |DFT|) of a real signal."""
    mags = np.abs(np.fft.rfft(x.samples))
    freqs = np.fft.rfftfreq(x.length, d=1.0 / x.sample_rate)
    return freqs, mags


def out_of_band_fraction(v: TimeSeries, cutoff_hz: float) -> float:
    """Fraction of spectral power strictly above ``cutoff_hz``."""
    freqs, mags = magnitude_spectrum(v)
    spectral_power = mags ** 2
    total = spectral_power.sum()
    if total == 0:
        return 0.0
    return float(spectral_power[freqs > cutoff_hz].sum() / total)


# ---------------------------------------------------------------------------
# Power and SNR
# ---------------------------------------------------------------------------

def power_samples(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[-1] == 0:
        raise SignalError("empty signal")
    return np.mean(samples ** 2, axis=-1)


def power(x: TimeSeries) -> float:
    return float(power_samples(x.samples))


def snr_db(x: TimeSeries, v: TimeSeries) -> float:
    if x.length != v.length:
        raise SignalError(f"length mismatch: signal {x.length} vs attack {v.length}")
    pv = power(v)
    if pv == 0:
        raise SignalError("zero-power attack")
    return 10.0 * math.log10(power(x) / pv)


def snr_scale_factors(px, pv, target_db: float) -> np.ndarray:
    """alpha such that 10*log10(px / (alpha^2 * pv)) == target_db (elementwise)."""
    if not np.isfinite(target_db):
        raise SignalError(f"target SNR must be finite, got {target_db}")
    pv = np.asarray(pv, dtype=np.float64)
    if np.any(pv == 0):
        raise SignalError("zero-power attack")
    return np.sqrt(np.asarray(px, dtype=np.float64) / pv) * 10.0 ** (-target_db / 20.0)


def scale_to_snr(x: TimeSeries, v: TimeSeries, target_db: float) -> TimeSeries:
    if x.length != v.length:
        raise SignalError(f"length mismatch: signal {x.length} vs attack {v.length}")
    alpha = float(snr_scale_factors(power(x), power(v), target_db))
    return v.with_samples(alpha * v.samples)


def scale_rows_to_snr(signals: np.ndarray, perturbations: np.ndarray, target_db: float) -> np.ndarray:
    """Per-example scaling of perturbations (N x T, or one T vector broadcast)."""
    perturbations = np.broadcast_to(perturbations, signals.shape)
    alpha = snr_scale_factors(power_samples(signals), power_samples(perturbations), target_db)
    return alpha[:, None] * perturbations


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------

def _filter_order(sample_rate: float, edge_hz: float, T: int) -> int:
    numtaps = int(round(4.0 * sample_rate / edge_hz))
    if numtaps % 2 == 0:
        numtaps += 1
    cap = max(T // 2, 1)
    if numtaps > cap:
        numtaps = cap if cap % 2 == 1 else cap - 1
    return max(numtaps, 1)


def design_lowpass(sample_rate: float, cutoff_hz: float, T: int) -> np.ndarray:
    """Hamming-windowed sinc, odd length, unit DC gain."""
    numtaps = _filter_order(sample_rate, cutoff_hz, T)
    if numtaps == 1:
        return np.ones(1)
    return sps.firwin(numtaps, cutoff_hz, window="hamming", fs=sample_rate)


def _apply_fir(samples: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # centered odd-length kernel: zero group delay, circular edges
    return ndimage.convolve1d(np.asarray(samples, dtype=np.float64), taps, axis=-1, mode="wrap")


def lowpass_samples(samples: np.ndarray, sample_rate: float, cutoff_hz: float) -> np.ndarray:
    nyquist = sample_rate / 2.0
    if not 0 < cutoff_hz <= nyquist:
        raise SignalError(f"cutoff {cutoff_hz} Hz outside (0, {nyquist}]")
    if cutoff_hz == nyquist:
        return np.array(samples, dtype=np.float64, copy=True)
    taps = design_lowpass(sample_rate, cutoff_hz, np.shape(samples)[-1])
    return _apply_fir(samples, taps)


def lowpass(x: TimeSeries, cutoff_hz: float) -> TimeSeries:
    return x.with_samples(lowpass_samples(x.samples, x.sample_rate, cutoff_hz))


def bandpass_samples(samples: np.ndarray, sample_rate: float, low_hz: float, high_hz: float) -> np.ndarray:
    nyquist = sample_rate / 2.0
    if not 0 < low_hz < high_hz < nyquist:
        raise SignalError(f"band [{low_hz}, {high_hz}] Hz must satisfy 0 < low < high < {nyquist}")
    numtaps = _filter_order(sample_rate, min(low_hz, high_hz - low_hz), np.shape(samples)[-1])
    if numtaps < 3:
        raise SignalError(f"signal too short for a band-pass filter ({np.shape(samples)[-1]} samples)")
    taps = sps.firwin(numtaps, [low_hz, high_hz], pass_zero=False, window="hamming", fs=sample_rate)
    return _apply_fir(samples, taps)


def bandpass(x: TimeSeries, low_hz: float, high_hz: float) -> TimeSeries:
    return x.with_samples(bandpass_samples(x.samples, x.sample_rate, low_hz, high_hz))


# ---------------------------------------------------------------------------
# Spectrogram
# ---------------------------------------------------------------------------

def hann_window(fft_len: int) -> np.ndarray:
    return sps.get_window("hann", fft_len, fftbins=True)


def stft_samples(samples: np.ndarray, fft_len: int, hop: int) -> np.ndarray:
    """Stacked real/imag STFT of the last axis: (..., T) -> (..., 2, F, W)."""
    samples = np.asarray(samples, dtype=np.float64)
    T = samples.shape[-1]
    if fft_len < 1 or hop < 1:
        raise SignalError(f"fft_len and hop must be positive, got {fft_len}, {hop}")
    if fft_len > T:
        raise SignalError(f"fft_len {fft_len} exceeds signal length {T}")
    frames = sliding_window_view(samples, fft_len, axis=-1)[..., ::hop, :]
    spec = np.fft.rfft(frames * hann_window(fft_len), axis=-1)
    spec = np.swapaxes(spec, -1, -2)
    return np.stack([spec.real, spec.imag], axis=-3)


def stft(x: TimeSeries, fft_len: int, hop: int) -> Spectrogram:
    return Spectrogram(data=stft_samples(x.samples, fft_len, hop), fft_len=fft_len, hop=hop)


# ---------------------------------------------------------------------------
# Defense transforms
# ---------------------------------------------------------------------------

def quantize_dequantize(x: TimeSeries, bits: int = 8) -> TimeSeries:
    """Uniform quantization over [min, max] into 2**bits levels, then reconstruction."""
    if bits < 1:
        raise SignalError(f"bits must be >= 1, got {bits}")
    samples = x.samples
    lo, hi = float(samples.min()), float(samples.max())
    if hi == lo:
        return x.with_samples(samples.copy())
    levels = 2 ** bits
    grid = np.linspace(lo, hi, levels)
    step = (hi - lo) / (levels - 1)
    index = np.clip(np.rint((samples - lo) / step), 0, levels - 1).astype(np.int64)
    return x.with_samples(grid[index])


def down_up_sample(x: TimeSeries) -> TimeSeries:
    """Anti-alias at f_s/4, decimate by 2, linearly interpolate back to length T."""
    T = x.length
    if T < 4:
        raise SignalError(f"signal too short for down-up sampling ({T} < 4 samples)")
    smoothed = lowpass_samples(x.samples, x.sample_rate, x.sample_rate / 4.0)
    kept = np.arange(0, T, 2)
    restored = np.interp(np.arange(T), kept, smoothed[kept])
    return x.with_samples(restored)


def noise_flood(
    x: TimeSeries,
    sigma: float = 0.01,
    seed: int = 0,
    band: Optional[Tuple[float, float]] = None,
) -> TimeSeries:
    """Add seeded Gaussian noise; with ``band`` the noise is band-passed and rescaled to ``sigma``."""
    if sigma < 0:
        raise SignalError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return x.with_samples(x.samples.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=x.length)
    if band is not None:
        noise = bandpass_samples(noise, x.sample_rate, band[0], band[1])
        std = noise.std()
        if std > 0:
            noise *= sigma / std
    return x.with_samples(x.samples + noise)
