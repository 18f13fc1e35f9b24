# models/classifier.py
import math

import torch
from torch import nn
import torch.nn.functional as F

from app.errors import ModelError
from app.schemas.classifier import ArchitectureSpec, StftConfig
from app.services.signal_service import hann_window


def _conv_out(size: int, kernel: int, stride: int) -> int:
    padding = kernel // 2
    return (size + 2 * padding - kernel) // stride + 1


class SpectrogramFrontend(nn.Module):
    """Differentiable twin of signal_service.stft_samples: (N, T) -> (N, 2, F, W)."""

    def __init__(self, stft: StftConfig):
        super().__init__()
        self.fft_len = stft.fft_len
        self.hop = stft.hop
        self.register_buffer("window", torch.from_numpy(hann_window(stft.fft_len)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        frames = x.unfold(-1, self.fft_len, self.hop) * self.window
        spec = torch.fft.rfft(frames, dim=-1).transpose(-1, -2)
        return torch.stack([spec.real, spec.imag], dim=-3)


class SpectrogramClassifier(nn.Module):
    """Spectrogram -> conv/ReLU x2 (stride 2) -> mean over windows -> dense logits.

    Parameters are float64 throughout so gradients can be checked against
    finite differences.
    """

    def __init__(
        self,
        arch: ArchitectureSpec,
        stft: StftConfig,
        num_classes: int,
        T: int,
        seed: int = 0,
        zero_init_head: bool = False,
    ):
        super().__init__()
        if stft.fft_len > T:
            raise ModelError(f"fft_len {stft.fft_len} exceeds signal length {T}")
        self.arch = arch
        self.stft = stft
        self.num_classes = num_classes
        self.T = T
        self.seed = seed

        k, s = arch.kernel_size, arch.stride
        self.frontend = SpectrogramFrontend(stft)
        self.conv1 = nn.Conv2d(2, arch.conv1_channels, k, stride=s, padding=k // 2, dtype=torch.float64)
        self.conv2 = nn.Conv2d(arch.conv1_channels, arch.conv2_channels, k, stride=s, padding=k // 2, dtype=torch.float64)
        bins = _conv_out(_conv_out(stft.num_bins, k, s), k, s)
        self.head = nn.Linear(arch.conv2_channels * bins, num_classes, dtype=torch.float64)
        self.input_scale = 1.0 / math.sqrt(stft.fft_len)
        self.reset_parameters(seed, zero_init_head)
        self.eval()

    @torch.no_grad()
    def reset_parameters(self, seed: int, zero_init_head: bool = False):
        g = torch.Generator().manual_seed(seed)
        for layer in (self.conv1, self.conv2, self.head):
            fan_in = layer.weight[0].numel()
            bound = math.sqrt(6.0 / fan_in)
            layer.weight.copy_((torch.rand(layer.weight.shape, generator=g, dtype=torch.float64) * 2 - 1) * bound)
            layer.bias.zero_()
        if zero_init_head:
            self.head.weight.zero_()

    def body(self, spec: torch.Tensor) -> torch.Tensor:
        h = F.relu(self.conv1(spec * self.input_scale))
        h = F.relu(self.conv2(h))
        h = h.mean(dim=-1)
        return self.head(h.flatten(1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.T:
            raise ModelError(f"input length {x.shape[-1]} != model length {self.T}")
        return self.body(self.frontend(x))

    def parameter_vector(self) -> torch.Tensor:
        return nn.utils.parameters_to_vector(self.parameters()).detach().clone()

    @torch.no_grad()
    def load_parameter_vector(self, vector: torch.Tensor):
        nn.utils.vector_to_parameters(vector.to(torch.float64), self.parameters())

    def descriptor(self) -> dict:
        return {
            "architecture": self.arch.model_dump(),
            "stft": self.stft.model_dump(),
            "num_classes": self.num_classes,
            "T": self.T,
            "seed": self.seed,
            "param_count": sum(p.numel() for p in self.parameters()),
        }
