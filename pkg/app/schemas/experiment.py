from typing import List, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.attack import FourierAttackConfig, UapConfig
from app.schemas.classifier import ArchitectureSpec, AugmentConfig, StftConfig
from app.schemas.data import SynthConfig

ATTACK_VARIANTS = ("fft", "fft_phase1_only", "fft_no_spectrum", "fft_no_timeshift", "uap", "noise")
PROTOCOLS = ("asr_snr", "time_shift", "filtering", "defense_auc", "spectrum")
TRANSFORMS = ("quantize", "down_up", "noise_flood", "noise_flood_band")


def _strictly_increasing(name: str, values: List[float]) -> List[float]:
    if not values:
        raise ValueError(f"{name} must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing")
    return values


class DatasetSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: Literal["synthetic", "wav"] = "synthetic"
    synth: SynthConfig = SynthConfig()
    wav_root: Optional[str] = None
    wav_segment_len: int = Field(16000, ge=1)
    wav_segments_per_file: int = Field(4, ge=1)
    val_fraction: float = Field(0.2, gt=0, lt=1)
    seed: int = 0

    @model_validator(mode="after")
    def validate_source(self):
        if self.source == "wav" and not self.wav_root:
            raise ValueError("wav_root is required when source is 'wav'")
        return self


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stft: StftConfig = StftConfig()
    arch: ArchitectureSpec = ArchitectureSpec()
    epochs: int = Field(20, ge=0)
    lr: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    batch_size: int = Field(32, ge=1)
    augment: AugmentConfig = AugmentConfig()
    wb_seed: int = 0
    bb_seed: int = 1


class AttackSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fourier: FourierAttackConfig = FourierAttackConfig()
    uap: UapConfig = UapConfig()
    fgsm_epsilon: float = Field(0.01, gt=0)
    variants: List[str] = list(ATTACK_VARIANTS)
    run_seeds: List[int] = [0, 1, 2]

    @field_validator("variants")
    def validate_variants(cls, v):
        unknown = sorted(set(v) - set(ATTACK_VARIANTS))
        if unknown:
            raise ValueError(f"unknown attack variants {unknown}; expected a subset of {ATTACK_VARIANTS}")
        if not v:
            raise ValueError("variants must be nonempty")
        return v

    @field_validator("run_seeds")
    def validate_run_seeds(cls, v):
        if not v:
            raise ValueError("run_seeds must be nonempty")
        if len(set(v)) != len(v):
            raise ValueError("run_seeds must be distinct")
        return v


class EvalSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    snr_grid: List[float] = [0.0, 5.0, 10.0, 15.0, 20.0, 30.0]
    shift_count: int = Field(16, ge=1)
    shift_snr_db: float = 10.0
    cutoff_grid: List[float] = [1000.0, 2000.0, 4000.0, 8000.0]
    filter_train_epochs: int = Field(10, ge=0)
    calibration_target_asr: Optional[float] = Field(0.4, gt=0, lt=1)
    filter_snr_db: float = 10.0
    transforms: List[str] = ["quantize", "down_up", "noise_flood"]
    defense_snr_db: float = 10.0
    distance_on: Literal["softmax", "logits"] = "softmax"
    n_each: int = Field(200, ge=1)
    spectrum_snr_db: float = 10.0
    max_eval_examples: Optional[int] = Field(None, ge=1)
    seed: int = 0

    @field_validator("snr_grid", "cutoff_grid")
    def validate_grid(cls, v, info):
        return _strictly_increasing(info.field_name, v)

    @field_validator("transforms")
    def validate_transforms(cls, v):
        unknown = sorted(set(v) - set(TRANSFORMS))
        if unknown:
            raise ValueError(f"unknown transforms {unknown}; expected a subset of {TRANSFORMS}")
        if not v:
            raise ValueError("transforms must be nonempty")
        return v


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: DatasetSection = DatasetSection()
    model: ModelSection = ModelSection()
    attack: AttackSection = AttackSection()
    eval: EvalSection = EvalSection()
    output_dir: str = "runs/default"
