import numpy as np
import pytest

from app.errors import SignalError
from app.schemas.signal import TimeSeries
from app.services.signal_service import (
    bandpass,
    cyclic_time_shift,
    dft,
    down_up_sample,
    hann_window,
    idft,
    lowpass,
    noise_flood,
    out_of_band_fraction,
    power,
    quantize_dequantize,
    real_part,
    scale_rows_to_snr,
    scale_to_snr,
    snr_db,
    stft,
    stft_samples,
)
from tests.conftest import tone


def _random_series(rng, T=64, f_s=8000.0):
    return TimeSeries(samples=rng.standard_normal(T), sample_rate=f_s)


def _shifted(x: TimeSeries, seconds: float) -> np.ndarray:
    return real_part(idft(cyclic_time_shift(dft(x), seconds)), x.sample_rate).samples


def test_dft_round_trip(rng):
    x = _random_series(rng, T=257)
    back = real_part(idft(dft(x)), x.sample_rate)
    assert np.max(np.abs(back.samples - x.samples)) < 1e-9


def test_parseval(rng):
    x = _random_series(rng, T=512)
    energy = np.sum(x.samples ** 2)
    spectral = np.sum(np.abs(dft(x).coefficients) ** 2) / x.length
    assert abs(energy - spectral) / energy < 1e-9


def test_dft_of_real_signal_is_conjugate_symmetric(rng):
    for T in (64, 65):
        assert dft(_random_series(rng, T=T)).is_conjugate_symmetric()


def test_empty_signal_rejected():
    with pytest.raises(SignalError, match="empty signal"):
        TimeSeries(samples=np.array([]), sample_rate=8000.0)


def test_non_finite_samples_rejected():
    with pytest.raises(SignalError):
        TimeSeries(samples=np.array([0.0, np.nan]), sample_rate=8000.0)


def test_shift_delays_an_impulse():
    x = TimeSeries(samples=np.eye(8)[0], sample_rate=8.0)
    shifted = _shifted(x, 1.0 / 8.0)
    np.testing.assert_allclose(shifted, np.eye(8)[1], atol=1e-12)


def test_whole_sample_shift_matches_roll(rng):
    x = _random_series(rng, T=64, f_s=64.0)
    np.testing.assert_allclose(_shifted(x, 5 / 64.0), np.roll(x.samples, 5), atol=1e-9)


def test_shift_by_full_period_is_identity(rng):
    x = _random_series(rng, T=64, f_s=1000.0)
    np.testing.assert_allclose(_shifted(x, x.duration), x.samples, atol=1e-9)


def test_shifts_compose_for_odd_length(rng):
    x = _random_series(rng, T=63, f_s=1000.0)
    a, b = 0.0123, 0.0271
    twice = cyclic_time_shift(cyclic_time_shift(dft(x), a), b)
    once = cyclic_time_shift(dft(x), a + b)
    np.testing.assert_allclose(twice.coefficients, once.coefficients, atol=1e-9)


@pytest.mark.parametrize("a, b", [(3, 5), (40, 30), (32, 32)])
def test_whole_sample_shifts_compose_for_even_length(rng, a, b):
    x = _random_series(rng, T=64, f_s=64.0)
    twice = cyclic_time_shift(cyclic_time_shift(dft(x), a / 64.0), b / 64.0)
    once = cyclic_time_shift(dft(x), (a + b) / 64.0)
    np.testing.assert_allclose(twice.coefficients, once.coefficients, atol=1e-9)
    back = real_part(idft(twice), x.sample_rate).samples
    np.testing.assert_allclose(back, np.roll(x.samples, a + b), atol=1e-9)


def test_shift_preserves_power(rng):
    x = _random_series(rng, T=63, f_s=1000.0)
    shifted = _shifted(x, 0.0171)
    assert abs(np.mean(shifted ** 2) - power(x)) < 1e-9


def test_snr_of_known_powers():
    x = TimeSeries(samples=np.ones(100), sample_rate=100.0)
    v = TimeSeries(samples=np.full(100, 0.1), sample_rate=100.0)
    assert snr_db(x, v) == pytest.approx(20.0)


def test_scale_to_snr_hits_target(rng):
    x = _random_series(rng, T=128)
    v = _random_series(rng, T=128)
    for target in (-5.0, 0.0, 10.0, 37.5):
        assert snr_db(x, scale_to_snr(x, v, target)) == pytest.approx(target, abs=1e-9)


def test_zero_power_attack_rejected(rng):
    x = _random_series(rng, T=16)
    zero = TimeSeries(samples=np.zeros(16), sample_rate=x.sample_rate)
    with pytest.raises(SignalError, match="zero-power attack"):
        snr_db(x, zero)
    with pytest.raises(SignalError, match="zero-power attack"):
        scale_to_snr(x, zero, 10.0)


def test_snr_length_mismatch_rejected(rng):
    with pytest.raises(SignalError, match="length mismatch"):
        snr_db(_random_series(rng, T=16), _random_series(rng, T=17))


def test_row_scaling_is_per_example(rng):
    signals = rng.standard_normal((4, 32)) * np.array([[1.0], [2.0], [0.5], [3.0]])
    v = rng.standard_normal(32)
    scaled = scale_rows_to_snr(signals, v, 10.0)
    ratios = 10 * np.log10(np.mean(signals ** 2, axis=1) / np.mean(scaled ** 2, axis=1))
    np.testing.assert_allclose(ratios, 10.0, atol=1e-9)


def test_lowpass_rejects_bad_cutoff():
    x = tone(440.0)
    for cutoff in (0.0, -10.0, 8000.5):
        with pytest.raises(SignalError):
            lowpass(x, cutoff)


def test_lowpass_at_nyquist_is_identity():
    x = tone(6000.0)
    assert np.array_equal(lowpass(x, 8000.0).samples, x.samples)


@pytest.mark.parametrize("cutoff", [500.0, 1000.0, 2000.0])
def test_lowpass_stop_band_at_twice_cutoff(cutoff):
    high = tone(2 * cutoff)
    attenuation_db = 10 * np.log10(power(lowpass(high, cutoff)) / power(high))
    assert attenuation_db <= -40.0


@pytest.mark.parametrize("cutoff", [500.0, 1000.0, 2000.0])
def test_lowpass_pass_band_at_half_cutoff(cutoff):
    low = tone(0.5 * cutoff)
    assert np.sqrt(power(lowpass(low, cutoff)) / power(low)) >= 0.99


def test_lowpass_of_tone_pair_keeps_the_low_tone():
    low, high = tone(500.0), tone(6000.0)
    mixed = low.with_samples(low.samples + high.samples)
    out = lowpass(mixed, 1000.0).samples
    assert np.linalg.norm(out - low.samples) < 0.05 * np.linalg.norm(low.samples)


def test_bandpass_keeps_band():
    inside = tone(1500.0)
    outside = tone(6000.0)
    assert power(bandpass(inside, 1000.0, 2000.0)) > 0.8 * power(inside)
    assert power(bandpass(outside, 1000.0, 2000.0)) < 1e-2 * power(outside)


def test_out_of_band_fraction_of_pure_tones():
    assert out_of_band_fraction(tone(500.0), 4000.0) < 1e-6
    assert out_of_band_fraction(tone(6000.0), 4000.0) > 0.99


def test_hann_window_is_periodic():
    n = np.arange(16)
    np.testing.assert_allclose(hann_window(16), 0.5 - 0.5 * np.cos(2 * np.pi * n / 16), atol=1e-12)


def test_stft_shape_and_frames(rng):
    x = _random_series(rng, T=256)
    spec = stft(x, fft_len=32, hop=16)
    assert spec.data.shape == (2, 17, 15)
    w = 3
    frame = np.fft.rfft(x.samples[16 * w: 16 * w + 32] * hann_window(32))
    np.testing.assert_allclose(spec.data[0, :, w], frame.real, atol=1e-12)
    np.testing.assert_allclose(spec.data[1, :, w], frame.imag, atol=1e-12)


def test_stft_batched_matches_single(rng):
    batch = rng.standard_normal((3, 128))
    stacked = stft_samples(batch, 32, 16)
    np.testing.assert_allclose(stacked[1], stft_samples(batch[1], 32, 16), atol=1e-12)


def test_stft_is_linear(rng):
    x, y = _random_series(rng, T=128), _random_series(rng, T=128)
    combined = x.with_samples(2.0 * x.samples - 3.0 * y.samples)
    expected = 2.0 * stft(x, 32, 16).data - 3.0 * stft(y, 32, 16).data
    np.testing.assert_allclose(stft(combined, 32, 16).data, expected, atol=1e-10)


def test_stft_of_silence_is_zero():
    silent = TimeSeries(samples=np.zeros(128), sample_rate=8000.0)
    assert np.all(stft(silent, 32, 16).data == 0.0)


def test_stft_window_longer_than_signal_rejected(rng):
    with pytest.raises(SignalError):
        stft(_random_series(rng, T=16), fft_len=32, hop=8)


def test_quantize_is_idempotent(rng):
    x = _random_series(rng, T=1000)
    once = quantize_dequantize(x)
    assert np.array_equal(quantize_dequantize(once).samples, once.samples)
    assert np.unique(once.samples).size <= 256


def test_quantize_constant_signal():
    x = TimeSeries(samples=np.full(10, 0.3), sample_rate=10.0)
    assert np.array_equal(quantize_dequantize(x).samples, x.samples)


def test_down_up_sample_keeps_low_frequencies():
    x = tone(200.0)
    y = down_up_sample(x)
    assert y.length == x.length
    assert np.corrcoef(x.samples, y.samples)[0, 1] > 0.95


def test_down_up_sample_removes_tone_above_quarter_rate():
    x = tone(5000.0)
    y = down_up_sample(x)
    assert power(y) < 0.05 * power(x)


@pytest.mark.parametrize("T", [100, 101])
def test_down_up_sample_keeps_length(rng, T):
    x = _random_series(rng, T=T, f_s=16000.0)
    assert down_up_sample(x).length == T


def test_noise_flood_is_seeded(rng):
    x = _random_series(rng, T=256)
    a = noise_flood(x, sigma=0.1, seed=7)
    b = noise_flood(x, sigma=0.1, seed=7)
    c = noise_flood(x, sigma=0.1, seed=8)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert np.array_equal(noise_flood(x, sigma=0.0, seed=7).samples, x.samples)


def test_band_limited_noise_flood_stays_in_band():
    x = TimeSeries(samples=np.zeros(4096), sample_rate=16000.0)
    noise = noise_flood(x, sigma=0.1, seed=3, band=(1000.0, 2000.0))
    assert np.std(noise.samples) == pytest.approx(0.1)
    assert out_of_band_fraction(noise, 3000.0) < 0.01
