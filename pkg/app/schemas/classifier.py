from typing import List
from pydantic import BaseModel, ConfigDict, Field


class StftConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fft_len: int = Field(256, ge=1)
    hop: int = Field(128, ge=1)

    @property
    def num_bins(self) -> int:
        """One-sided frequency bins F."""
        return self.fft_len // 2 + 1

    def num_windows(self, T: int) -> int:
        return (T - self.fft_len) // self.hop + 1


class ArchitectureSpec(BaseModel):
    """Fixed layout: two conv layers (stride 2, ReLU), time-axis average pool, dense head."""

    model_config = ConfigDict(extra="forbid")

    conv1_channels: int = Field(16, ge=1)
    conv2_channels: int = Field(32, ge=1)
    kernel_size: int = Field(3, ge=1)
    stride: int = Field(2, ge=1)


class AugmentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    noise_std: float = Field(0.02, ge=0)
    time_mask_max: int = Field(3, ge=0)
    freq_mask_max: int = Field(12, ge=0)


class TrainLog(BaseModel):
    train_loss: List[float] = []
    train_accuracy: List[float] = []
    val_accuracy: List[float] = []
    wall_time: List[float] = []
    best_epoch: int = -1

    @property
    def epochs(self) -> int:
        return len(self.train_loss)
