from typing import Iterator, List, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, model_validator
import numpy as np

from app.errors import DataError
from app.schemas.signal import TimeSeries


class SynthConfig(BaseModel):
    """Multi-tone synthetic dataset settings; every class shares one frequency band."""

    model_config = ConfigDict(extra="forbid")

    num_classes: int = Field(10, ge=2)
    examples_per_class: int = Field(200, ge=1)
    val_examples_per_class: int = Field(50, ge=1)
    T: int = Field(2048, ge=8)
    f_s: float = Field(16000.0, gt=0)
    band_low_hz: float = 500.0
    band_high_hz: float = 4000.0
    tone_count_per_class: int = Field(3, ge=1)
    tone_spacing_hz: float = Field(62.5, gt=0)
    amplitude: float = Field(0.5, gt=0)
    amplitude_jitter: float = Field(0.2, ge=0, lt=1)
    noise_std: float = Field(0.05, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def validate_band(self):
        if not 0 < self.band_low_hz < self.band_high_hz:
            raise DataError(
                f"band must satisfy 0 < band_low_hz < band_high_hz, got "
                f"[{self.band_low_hz}, {self.band_high_hz}]"
            )
        if self.band_high_hz > self.f_s / 2:
            raise DataError(
                f"band wider than Nyquist: band_high_hz={self.band_high_hz} > {self.f_s / 2}"
            )
        return self


class LabeledSignal(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    signal: TimeSeries
    label: int = Field(ge=0)


class Dataset(BaseModel):
    """Labeled signals sharing one length T and one sample rate.

    Signals are held as an N x T float64 matrix; ``items`` materializes
    LabeledSignal views on demand.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    signals: np.ndarray
    labels: np.ndarray
    num_classes: int = Field(ge=1)
    sample_rate: float = Field(gt=0)
    split_tag: Literal["train", "val"] = "train"
    class_names: Optional[List[str]] = None

    @model_validator(mode="after")
    def validate_arrays(self):
        self.signals = np.ascontiguousarray(self.signals, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.signals.ndim != 2:
            raise DataError(f"signals must be an N x T matrix, got shape {self.signals.shape}")
        if self.labels.shape != (self.signals.shape[0],):
            raise DataError(
                f"labels length {self.labels.shape} does not match {self.signals.shape[0]} signals"
            )
        if self.signals.shape[0] and not np.all(np.isfinite(self.signals)):
            raise DataError("dataset contains non-finite samples")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        return self

    @property
    def length(self) -> int:
        """Common signal length T."""
        return int(self.signals.shape[1])

    def __len__(self) -> int:
        return int(self.signals.shape[0])

    def item(self, index: int) -> LabeledSignal:
        return LabeledSignal(
            signal=TimeSeries(samples=self.signals[index], sample_rate=self.sample_rate),
            label=int(self.labels[index]),
        )

    @property
    def items(self) -> List[LabeledSignal]:
        return [self.item(i) for i in range(len(self))]

    def __iter__(self) -> Iterator[LabeledSignal]:
        for i in range(len(self)):
            yield self.item(i)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return self.model_copy(
            update={"signals": self.signals[indices], "labels": self.labels[indices]}
        )

    def with_signals(self, signals: np.ndarray) -> "Dataset":
        return self.model_copy(update={"signals": np.asarray(signals, dtype=np.float64)})

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)
