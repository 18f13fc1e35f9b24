import numpy as np
import pytest
import soundfile as sf

from app.errors import DataError, WavFormatError
from app.schemas.data import Dataset, SynthConfig
from app.schemas.signal import TimeSeries
from app.services.data_service import (
    draw_class_tones,
    generate_synthetic,
    load_dataset,
    load_wav_corpus,
    load_wav_segments,
    read_wav,
    save_dataset,
    split,
)
from app.services.signal_service import out_of_band_fraction
from tests.conftest import TINY_SYNTH


def _write_tone_wav(path, seconds=0.5, rate=8000, subtype="PCM_16", freq=440.0):
    t = np.arange(int(seconds * rate)) / rate
    sf.write(str(path), 0.5 * np.sin(2 * np.pi * freq * t), rate, subtype=subtype)
    return path


def test_synthetic_shapes_and_balance(tiny_train, tiny_val, tiny_synth):
    assert tiny_train.signals.shape == (36, 256)
    assert tiny_val.signals.shape == (18, 256)
    assert tiny_train.split_tag == "train" and tiny_val.split_tag == "val"
    assert np.array_equal(tiny_train.class_counts(), [12, 12, 12])
    assert tiny_train.sample_rate == tiny_synth.f_s


def test_synthetic_is_deterministic(tiny_synth):
    a_train, a_val = generate_synthetic(tiny_synth)
    b_train, b_val = generate_synthetic(tiny_synth)
    assert np.array_equal(a_train.signals, b_train.signals)
    assert np.array_equal(a_val.signals, b_val.signals)
    other, _ = generate_synthetic(tiny_synth.model_copy(update={"seed": 1}))
    assert not np.array_equal(a_train.signals, other.signals)


def test_class_tones_are_distinct_and_in_band(tiny_synth):
    tones = draw_class_tones(tiny_synth)
    assert tones.shape == (3, 2)
    assert np.unique(tones).size == tones.size
    assert tones.min() >= tiny_synth.band_low_hz
    assert tones.max() <= tiny_synth.band_high_hz


def test_synthetic_energy_stays_in_band(tiny_train, tiny_synth):
    fractions = [
        out_of_band_fraction(TimeSeries(samples=row, sample_rate=tiny_synth.f_s), tiny_synth.band_high_hz)
        for row in tiny_train.signals
    ]
    assert max(fractions) < 0.05


def test_band_wider_than_nyquist_rejected():
    with pytest.raises(DataError, match="band wider than Nyquist"):
        SynthConfig(**{**TINY_SYNTH, "band_high_hz": 2500.0})


def test_too_many_tones_for_band_rejected():
    cfg = SynthConfig(**{**TINY_SYNTH, "num_classes": 20, "tone_count_per_class": 3})
    with pytest.raises(DataError):
        draw_class_tones(cfg)


def test_dataset_validates_labels():
    with pytest.raises(DataError):
        Dataset(signals=np.zeros((2, 4)), labels=np.array([0, 3]), num_classes=2, sample_rate=10.0)
    with pytest.raises(DataError):
        Dataset(signals=np.zeros((2, 4)), labels=np.array([0]), num_classes=2, sample_rate=10.0)


def test_dataset_round_trip(tmp_path, tiny_val):
    path = tmp_path / "val.bin"
    save_dataset(tiny_val, path, config_hash="abc")
    loaded = load_dataset(path)
    assert np.array_equal(loaded.signals, tiny_val.signals)
    assert np.array_equal(loaded.labels, tiny_val.labels)
    assert loaded.sample_rate == tiny_val.sample_rate
    assert loaded.split_tag == "val"


def test_dataset_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTADATASET" + b"\x00" * 32)
    with pytest.raises(DataError, match="magic"):
        load_dataset(path)


def test_dataset_truncated(tmp_path, tiny_val):
    path = tmp_path / "val.bin"
    save_dataset(tiny_val, path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(DataError, match="labels"):
        load_dataset(path)


def test_read_wav_pcm16(tmp_path):
    samples, rate = read_wav(_write_tone_wav(tmp_path / "a.wav"))
    assert rate == 8000.0
    assert samples.shape == (4000,)
    assert np.max(np.abs(samples)) <= 1.0
    assert np.max(np.abs(samples)) == pytest.approx(0.5, abs=1e-3)


def test_read_wav_float(tmp_path):
    samples, _ = read_wav(_write_tone_wav(tmp_path / "f.wav", subtype="FLOAT"))
    assert np.max(np.abs(samples)) == pytest.approx(0.5, abs=1e-6)


def test_read_wav_not_riff(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"JUNK" + b"\x00" * 64)
    with pytest.raises(WavFormatError, match="chunk_id"):
        read_wav(path)


def test_read_wav_unsupported_encoding(tmp_path):
    path = _write_tone_wav(tmp_path / "p24.wav", subtype="PCM_24")
    with pytest.raises(WavFormatError, match="unsupported encoding"):
        read_wav(path)


def test_read_wav_rate_mismatch(tmp_path):
    path = _write_tone_wav(tmp_path / "a.wav")
    with pytest.raises(WavFormatError, match="sample_rate"):
        read_wav(path, expected_rate=16000.0)


def test_wav_segments(tmp_path):
    ds = load_wav_segments(_write_tone_wav(tmp_path / "a.wav"), 512, 5, seed=0, label=1, num_classes=2)
    assert ds.signals.shape == (5, 512)
    assert np.all(ds.labels == 1)
    again = load_wav_segments(tmp_path / "a.wav", 512, 5, seed=0, label=1, num_classes=2)
    assert np.array_equal(ds.signals, again.signals)


def test_wav_segments_too_short(tmp_path):
    with pytest.raises(DataError, match="shorter than segment length"):
        load_wav_segments(_write_tone_wav(tmp_path / "a.wav", seconds=0.01), 512, 2, seed=0)


def test_wav_corpus_labels_from_directories(tmp_path):
    for name, freq in (("down", 300.0), ("up", 900.0)):
        (tmp_path / name).mkdir()
        _write_tone_wav(tmp_path / name / "0.wav", freq=freq)
        _write_tone_wav(tmp_path / name / "1.wav", freq=freq)
    ds = load_wav_corpus(tmp_path, 256, 3, seed=0)
    assert ds.num_classes == 2
    assert ds.class_names == ["down", "up"]
    assert np.array_equal(ds.class_counts(), [6, 6])


def test_split_is_stratified_and_disjoint(tiny_train):
    a, b = split(tiny_train, 0.75, seed=0)
    assert np.array_equal(a.class_counts(), [9, 9, 9])
    assert np.array_equal(b.class_counts(), [3, 3, 3])
    rows_a = {row.tobytes() for row in a.signals}
    rows_b = {row.tobytes() for row in b.signals}
    assert not rows_a & rows_b


def test_split_is_seeded_and_exhaustive(rng):
    labels = np.repeat([0, 1], 10)
    ds = Dataset(signals=rng.standard_normal((20, 8)), labels=labels, num_classes=2, sample_rate=10.0)
    a, b = split(ds, 0.5, seed=3)
    assert np.array_equal(a.class_counts(), [5, 5])
    assert np.array_equal(b.class_counts(), [5, 5])
    joined = np.concatenate([a.signals, b.signals])
    assert sorted(row.tobytes() for row in joined) == sorted(row.tobytes() for row in ds.signals)
    again, _ = split(ds, 0.5, seed=3)
    assert np.array_equal(again.signals, a.signals)


def test_split_rejects_singleton_class():
    ds = Dataset(signals=np.zeros((3, 4)), labels=np.array([0, 0, 1]), num_classes=2, sample_rate=10.0)
    with pytest.raises(DataError, match="at least 2"):
        split(ds, 0.5, seed=0)
