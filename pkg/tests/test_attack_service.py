import numpy as np
import pytest
import torch

from app.errors import AttackError, HashMismatchError
from app.schemas.attack import AttackTag, FourierAttackConfig
from app.schemas.signal import TimeSeries
from app.services.attack_service import (
    FgsmSource,
    UniversalSource,
    beta_at,
    fgsm,
    fourier_objective,
    gaussian_noise_attack,
    load_attack,
    phase1_penalty,
    phase2_penalty,
    save_attack,
    spectrum_loss_phase1,
    spectrum_loss_phase2,
    spectrum_violation_fraction,
    step_size_at,
    symmetrize,
    train_fourier_attack,
    train_uap,
)
from app.services.classifier_service import batch_loss


def _quick_cfg(**update) -> FourierAttackConfig:
    base = dict(epochs=3, alpha=0.05, beta=1.0, batch_size=4, max_examples=12, seed=0)
    base.update(update)
    return FourierAttackConfig(**base)


@pytest.fixture(scope="module")
def fourier_attack(trained_model, tiny_train):
    return train_fourier_attack(trained_model, tiny_train, _quick_cfg())


def test_phase1_single_bin_violation():
    x_mag = torch.tensor([1.0, 1.0, 1.0, 2.0, 1.0], dtype=torch.float64)
    xv_mag = torch.tensor([1.0, 0.5, 2.0, 5.0, 0.0], dtype=torch.float64)
    assert phase1_penalty(x_mag, xv_mag, cap=2.0).item() == pytest.approx(1.0)


def test_phase2_log_scale_and_excluded_bins():
    x_mag = torch.tensor([1.0, 0.0, 3.0], dtype=torch.float64)
    xv_mag = torch.tensor([20.0, 5.0, 1.0], dtype=torch.float64)
    # bin 0: 20 log10(20 / 2) = 20 dB; bin 1 has a zero reference and is skipped
    assert phase2_penalty(x_mag, xv_mag, cap=2.0).item() == pytest.approx(20.0)


def test_spectrum_losses_vanish_for_unchanged_signal(rng):
    x = TimeSeries(samples=rng.standard_normal(64), sample_rate=1000.0)
    assert spectrum_loss_phase1(x, x) == 0.0
    assert spectrum_loss_phase2(x, x) == 0.0


def test_phase1_with_silent_reference(rng):
    zero = TimeSeries(samples=np.zeros(32), sample_rate=1000.0)
    xv = TimeSeries(samples=rng.standard_normal(32), sample_rate=1000.0)
    assert spectrum_loss_phase1(zero, xv) == pytest.approx(np.sum(np.abs(np.fft.fft(xv.samples))))


def test_spectrum_loss_length_mismatch(rng):
    with pytest.raises(AttackError):
        spectrum_loss_phase1(
            TimeSeries(samples=rng.standard_normal(8), sample_rate=10.0),
            TimeSeries(samples=rng.standard_normal(9), sample_rate=10.0),
        )


@pytest.mark.parametrize("phase", [1, 2])
def test_objective_gradient_matches_finite_differences(untrained_model, tiny_val, rng, phase):
    signals = torch.from_numpy(tiny_val.signals[:2].copy())
    labels = torch.from_numpy(tiny_val.labels[:2].copy())
    T = signals.shape[-1]
    v0 = 0.5 * (rng.standard_normal(T) + 1j * rng.standard_normal(T))
    shifts = [3.5, 100.25]

    v_re = torch.tensor(v0.real, requires_grad=True)
    v_im = torch.tensor(v0.imag, requires_grad=True)
    J, _, _ = fourier_objective(untrained_model, signals, labels, v_re, v_im, shifts, beta=0.5, phase=phase)
    g_re, g_im = torch.autograd.grad(J, (v_re, v_im))

    def objective(re, im):
        re, im = torch.from_numpy(np.ascontiguousarray(re)), torch.from_numpy(np.ascontiguousarray(im))
        with torch.no_grad():
            value, _, _ = fourier_objective(untrained_model, signals, labels, re, im, shifts, beta=0.5, phase=phase)
        return value.item()

    h = 1e-6
    for k in rng.choice(T, size=4, replace=False):
        e = np.zeros(T)
        e[k] = h
        fd_re = (objective(v0.real + e, v0.imag) - objective(v0.real - e, v0.imag)) / (2 * h)
        fd_im = (objective(v0.real, v0.imag + e) - objective(v0.real, v0.imag - e)) / (2 * h)
        np.testing.assert_allclose(g_re[k].item(), fd_re, rtol=1e-4, atol=1e-6)
        np.testing.assert_allclose(g_im[k].item(), fd_im, rtol=1e-4, atol=1e-6)


def test_zero_epochs_gives_zero_attack(trained_model, tiny_train):
    attack = train_fourier_attack(trained_model, tiny_train, _quick_cfg(epochs=0))
    assert np.all(attack.v_time.samples == 0.0)
    assert attack.tag == AttackTag.FFT


def test_trained_attack_is_real_and_symmetric(fourier_attack):
    assert fourier_attack.v_freq.is_conjugate_symmetric(atol=1e-12)
    assert np.max(np.abs(np.fft.ifft(fourier_attack.v_freq.coefficients).imag)) < 1e-9
    assert np.linalg.norm(fourier_attack.v_time.samples) > 0
    assert len(fourier_attack.history) == 3


def test_epoch_mean_objective_rises_without_spectrum_loss(trained_model, tiny_train):
    cfg = _quick_cfg(beta=0.0, epochs=6, alpha=0.5, alpha_decay_to=1.0)
    attack = train_fourier_attack(trained_model, tiny_train, cfg)
    assert attack.tag == AttackTag.FFT_NO_SPECTRUM_LOSS
    history = np.asarray(attack.history)
    assert history.size == 6
    assert history[-1] > history[0]
    assert history[3:].mean() > history[:3].mean()
    v = attack.v_time.samples
    before = batch_loss(trained_model, tiny_train.signals, tiny_train.labels)
    after = batch_loss(trained_model, tiny_train.signals + v, tiny_train.labels)
    assert after > before


def test_trained_attack_respects_the_spectrum_cap(trained_model, tiny_train):
    # the total step length bounds ||v_freq||, which bounds the share of bins it can dominate
    cfg = _quick_cfg(beta=FourierAttackConfig().beta, epochs=4, alpha=0.01)
    attack = train_fourier_attack(trained_model, tiny_train, cfg)
    assert np.linalg.norm(attack.v_freq.coefficients) <= 12 * cfg.alpha * np.sqrt(tiny_train.length) + 1e-9
    assert spectrum_violation_fraction(tiny_train, attack.v_time.samples, cfg.cap) < 0.05


def test_beta_warms_up_linearly():
    cfg = FourierAttackConfig(beta=0.4, beta_warmup=0.25)
    assert beta_at(cfg, 0.0) == 0.0
    assert beta_at(cfg, 0.125) == pytest.approx(0.2)
    assert beta_at(cfg, 0.25) == 0.4
    assert beta_at(cfg, 0.9) == 0.4
    assert beta_at(FourierAttackConfig(beta=0.4, beta_warmup=0.0), 0.0) == 0.4


def test_step_size_anneals_from_alpha():
    cfg = FourierAttackConfig(alpha=0.05, alpha_decay_to=0.1)
    full = 0.05 * np.sqrt(256)
    assert step_size_at(cfg, 256, 0.0) == pytest.approx(full)
    assert step_size_at(cfg, 256, 0.5) == pytest.approx(0.55 * full)
    assert step_size_at(cfg, 256, 1.0) == pytest.approx(0.1 * full)
    assert step_size_at(FourierAttackConfig(alpha_decay_to=1.0), 256, 0.7) == pytest.approx(0.05 * 16)


def test_variant_tags_follow_config(trained_model, tiny_train):
    assert train_fourier_attack(trained_model, tiny_train, _quick_cfg(epochs=0, time_shift=False)).tag == AttackTag.FFT_NO_TIMESHIFT
    assert train_fourier_attack(trained_model, tiny_train, _quick_cfg(epochs=0, phase1_fraction=1.0)).tag == AttackTag.FFT_PHASE1_ONLY


def test_attack_training_is_deterministic(trained_model, tiny_train, fourier_attack):
    again = train_fourier_attack(trained_model, tiny_train, _quick_cfg())
    assert np.array_equal(again.v_freq.coefficients, fourier_attack.v_freq.coefficients)


def test_attack_length_must_match_model(trained_model, tiny_train):
    short = tiny_train.with_signals(tiny_train.signals[:, :128])
    with pytest.raises(AttackError, match="length"):
        train_fourier_attack(trained_model, short, _quick_cfg())


def test_symmetrize_projects_onto_real_signals(rng):
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    sym = symmetrize(v)
    assert np.max(np.abs(np.fft.ifft(sym).imag)) < 1e-12
    np.testing.assert_allclose(np.fft.ifft(sym).real, np.fft.ifft(v).real, atol=1e-12)


def test_fgsm_is_a_sign_vector(trained_model, tiny_val):
    item = tiny_val.item(0)
    v = fgsm(trained_model, item.signal, item.label, 0.01)
    assert set(np.unique(v.samples)) <= {-0.01, 0.0, 0.01}
    assert np.all(fgsm(trained_model, item.signal, item.label, 0.0).samples == 0.0)


def test_fgsm_source_matches_fgsm(trained_model, tiny_val):
    source = FgsmSource(trained_model, 0.02)
    item = tiny_val.item(3)
    np.testing.assert_array_equal(
        source.perturbation(item), fgsm(trained_model, item.signal, item.label, 0.02).samples
    )


def test_uap_respects_norm_budget(trained_model, tiny_train):
    attack = train_uap(trained_model, tiny_train, epochs=2, step=0.5, norm_budget=1.0, seed=0, max_examples=12)
    assert attack.tag == AttackTag.UAP
    assert np.linalg.norm(attack.v_time.samples) <= 1.0 + 1e-9
    assert len(attack.history) == 2


def test_uap_zero_epochs(trained_model, tiny_train):
    attack = train_uap(trained_model, tiny_train, epochs=0, step=0.5, norm_budget=1.0, seed=0)
    assert np.all(attack.v_time.samples == 0.0)


def test_gaussian_noise_attack_statistics():
    attack = gaussian_noise_attack(200_000, 16000.0, seed=0)
    v = attack.v_time.samples
    assert np.mean(v ** 2) == pytest.approx(1.0, rel=0.01)
    assert abs(np.mean(v)) < 5.0 / np.sqrt(v.size)
    again = gaussian_noise_attack(200_000, 16000.0, seed=0)
    assert np.array_equal(v, again.v_time.samples)
    np.testing.assert_allclose(v, np.random.default_rng(0).standard_normal(200_000), atol=1e-9)


def test_spectrum_violation_fraction(tiny_val, rng):
    assert spectrum_violation_fraction(tiny_val, np.zeros(256)) == 0.0
    loud = 100.0 * rng.standard_normal(256)
    assert spectrum_violation_fraction(tiny_val, loud) > 0.5


def test_universal_source_shift_by_period(fourier_attack, tiny_val):
    source = UniversalSource(fourier_attack)
    period = tiny_val.length / tiny_val.sample_rate
    np.testing.assert_allclose(source.shifted(period).vector, source.vector, atol=1e-9)
    perturbations = source.perturbations(tiny_val.signals, tiny_val.labels)
    assert perturbations.shape == tiny_val.signals.shape


def test_attack_file_round_trip(tmp_path, fourier_attack):
    path = tmp_path / "fft_s0.atk"
    save_attack(fourier_attack, path, config_hash="abc")
    loaded = load_attack(path, expected_hash="abc")
    assert loaded.tag == fourier_attack.tag
    assert loaded.history == fourier_attack.history
    np.testing.assert_allclose(loaded.v_freq.coefficients, fourier_attack.v_freq.coefficients, atol=1e-15)


def test_attack_file_without_hash_is_foreign(tmp_path, fourier_attack):
    path = tmp_path / "unhashed.atk"
    save_attack(fourier_attack, path)
    with pytest.raises(HashMismatchError, match="no config hash"):
        load_attack(path, expected_hash="abc")
    assert load_attack(path).tag == fourier_attack.tag
    save_attack(fourier_attack, path, config_hash="def")
    with pytest.raises(HashMismatchError, match="def"):
        load_attack(path, expected_hash="abc")


def test_attack_file_rejects_bad_input(tmp_path, fourier_attack):
    path = tmp_path / "a.atk"
    save_attack(fourier_attack, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(AttackError, match="truncated"):
        load_attack(path)
    junk = tmp_path / "junk.atk"
    junk.write_bytes(b"X" * 64)
    with pytest.raises(AttackError, match="magic"):
        load_attack(junk)
