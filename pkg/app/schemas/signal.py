from pydantic import BaseModel, ConfigDict, field_validator, model_validator
import numpy as np

from app.errors import SignalError


class TimeSeries(BaseModel):
    """Real-valued sampled signal with its sample rate (Hz)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: np.ndarray
    sample_rate: float

    @field_validator("samples", mode="before")
    def validate_samples(cls, v):
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1:
            raise SignalError(f"samples must be one-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise SignalError("empty signal")
        if not np.all(np.isfinite(arr)):
            raise SignalError("samples contain NaN or Inf")
        return arr

    @field_validator("sample_rate")
    def validate_sample_rate(cls, v):
        if not v > 0:
            raise SignalError(f"sample_rate must be positive, got {v}")
        return float(v)

    @property
    def length(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        """Duration in seconds."""
        return self.length / self.sample_rate

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(samples=samples, sample_rate=self.sample_rate)


class Spectrum(BaseModel):
    """Complex Fourier coefficients ordered by bin k = 0..T-1 (unnormalized forward DFT)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: np.ndarray
    sample_rate: float
    real_signal: bool = False

    @field_validator("coefficients", mode="before")
    def validate_coefficients(cls, v):
        arr = np.asarray(v, dtype=np.complex128)
        if arr.ndim != 1:
            raise SignalError(f"coefficients must be one-dimensional, got shape {arr.shape}")
        if arr.size == 0:
            raise SignalError("empty spectrum")
        if not np.all(np.isfinite(arr)):
            raise SignalError("coefficients contain NaN or Inf")
        return arr

    @field_validator("sample_rate")
    def validate_sample_rate(cls, v):
        if not v > 0:
            raise SignalError(f"sample_rate must be positive, got {v}")
        return float(v)

    @property
    def length(self) -> int:
        return int(self.coefficients.shape[0])

    def is_conjugate_symmetric(self, atol: float = 0.0) -> bool:
        c = self.coefficients
        T = c.shape[0]
        mirrored = np.conj(c[(-np.arange(T)) % T])
        if atol == 0.0:
            return bool(np.array_equal(c, mirrored))
        return bool(np.max(np.abs(c - mirrored)) <= atol)


class Spectrogram(BaseModel):
    """Stacked STFT: channel 0 real parts, channel 1 imaginary parts, shape 2 x F x W."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    fft_len: int
    hop: int

    @model_validator(mode="after")
    def validate_data(self):
        if self.data.ndim != 3 or self.data.shape[0] != 2:
            raise SignalError(f"spectrogram must have shape 2 x F x W, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise SignalError("spectrogram contains NaN or Inf")
        if self.fft_len < 1 or self.hop < 1:
            raise SignalError("fft_len and hop must be positive")
        return self

    @property
    def num_bins(self) -> int:
        return int(self.data.shape[1])

    @property
    def num_windows(self) -> int:
        return int(self.data.shape[2])
