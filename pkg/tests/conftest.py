import numpy as np
import pytest
import yaml

from app.schemas.classifier import ArchitectureSpec, AugmentConfig, StftConfig
from app.schemas.data import SynthConfig
from app.schemas.signal import TimeSeries
from app.services.classifier_service import build_classifier, train_classifier
from app.services.data_service import generate_synthetic

TINY_SYNTH = dict(
    num_classes=3,
    examples_per_class=12,
    val_examples_per_class=6,
    T=256,
    f_s=4000.0,
    band_low_hz=200.0,
    band_high_hz=1000.0,
    tone_count_per_class=2,
    tone_spacing_hz=31.25,
    amplitude=0.5,
    amplitude_jitter=0.2,
    noise_std=0.05,
    seed=0,
)
TINY_STFT = StftConfig(fft_len=32, hop=16)
TINY_ARCH = ArchitectureSpec(conv1_channels=4, conv2_channels=8)
NO_AUGMENT = AugmentConfig(enabled=False)


@pytest.fixture(scope="session")
def tiny_synth() -> SynthConfig:
    return SynthConfig(**TINY_SYNTH)


@pytest.fixture(scope="session")
def tiny_data(tiny_synth):
    return generate_synthetic(tiny_synth)


@pytest.fixture(scope="session")
def tiny_train(tiny_data):
    return tiny_data[0]


@pytest.fixture(scope="session")
def tiny_val(tiny_data):
    return tiny_data[1]


@pytest.fixture(scope="session")
def untrained_model(tiny_train):
    return build_classifier(TINY_ARCH, TINY_STFT, tiny_train.num_classes, tiny_train.length, seed=3)


@pytest.fixture(scope="session")
def trained(tiny_train, tiny_val):
    """(model, log) after a short deterministic training run."""
    return train_classifier(
        tiny_train,
        tiny_val,
        epochs=15,
        lr=0.05,
        aug=NO_AUGMENT,
        seed=0,
        arch=TINY_ARCH,
        stft=TINY_STFT,
        batch_size=8,
    )


@pytest.fixture(scope="session")
def trained_model(trained):
    return trained[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone(freq_hz: float, T: int = 2048, f_s: float = 16000.0, amplitude: float = 1.0) -> TimeSeries:
    t = np.arange(T) / f_s
    return TimeSeries(samples=amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate=f_s)


def tiny_experiment_config(output_dir) -> dict:
    """Experiment config small enough for end-to-end CLI runs in tests."""
    return {
        "output_dir": str(output_dir),
        "dataset": {"synth": dict(TINY_SYNTH)},
        "model": {
            "stft": TINY_STFT.model_dump(),
            "arch": TINY_ARCH.model_dump(),
            "epochs": 3,
            "lr": 0.05,
            "batch_size": 8,
            "augment": {"enabled": False},
        },
        "attack": {
            "fourier": {"epochs": 2, "batch_size": 4, "max_examples": 12},
            "uap": {"epochs": 1, "max_examples": 12},
            "run_seeds": [0, 1],
        },
        "eval": {
            "snr_grid": [0.0, 10.0],
            "shift_count": 4,
            "cutoff_grid": [1000.0, 2000.0],
            "filter_train_epochs": 1,
            "calibration_target_asr": None,
            "n_each": 8,
        },
    }


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_experiment_config(tmp_path / "run")))
    return path
