from enum import Enum
from typing import Any, Dict, Optional
from pydantic import BaseModel, ConfigDict, Field

from app.schemas.signal import Spectrum, TimeSeries


class AttackTag(str, Enum):
    FFT = "fft"
    FFT_PHASE1_ONLY = "fft_phase1_only"
    FFT_NO_SPECTRUM_LOSS = "fft_no_spectrum_loss"
    FFT_NO_TIMESHIFT = "fft_no_timeshift"
    UAP = "uap"
    NOISE = "noise"
    FGSM = "fgsm"


class FourierAttackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(40, ge=0)
    alpha: float = Field(0.05, gt=0)
    # final step length as a fraction of alpha (cosine schedule); 1 keeps it constant
    alpha_decay_to: float = Field(0.1, gt=0, le=1)
    # spectrum loss is in unnormalized DFT units (order T x amplitude), cross-entropy in nats
    beta: float = Field(0.002, ge=0)
    # fraction of the steps over which beta ramps up from 0
    beta_warmup: float = Field(0.25, ge=0, lt=1)
    phase1_fraction: float = Field(0.8, gt=0, le=1)
    cap: float = Field(2.0, gt=0)
    time_shift: bool = True
    batch_size: int = Field(32, ge=1)
    # None trains on the whole training set
    max_examples: Optional[int] = Field(800, ge=1)
    seed: int = 0


class UapConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(10, ge=0)
    step: float = Field(0.5, gt=0)
    norm_budget: float = Field(8.0, gt=0)
    max_examples: Optional[int] = Field(400, ge=1)
    seed: int = 0


class AttackVector(BaseModel):
    """A trained universal perturbation and its provenance."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    v_freq: Spectrum
    v_time: TimeSeries
    tag: AttackTag
    config: Dict[str, Any] = {}
    seed: int = 0
    # per-epoch mean objective, kept for diagnostics
    history: list = []

    @property
    def length(self) -> int:
        return self.v_time.length

    @property
    def sample_rate(self) -> float:
        return self.v_time.sample_rate
