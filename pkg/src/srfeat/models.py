"""Generator and discriminator networks for 4x single-image super-resolution.

The generator is a fully-convolutional encoder/decoder: a stack of identical
residual blocks (no batch normalization) followed by sub-pixel upsampling
stages. The discriminator is an 8-block convolutional classifier that, besides
its real/fake probability, exposes the pre-activation feature map of every
conv block; those taps feed the feature-matching content losses.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import torch
from torch import Tensor, nn

from .errors import ConfigurationError, InputError

DEFAULT_DISC_CHANNELS = (64, 64, 128, 128, 256, 256, 512, 512)


@dataclass(frozen=True)
class GeneratorConfig:
    num_residual_blocks: int = 16
    channels: int = 64
    kernel_size: int = 3
    leaky_slope: float = 0.2
    upscale_stages: int = 2  # each stage doubles the resolution
    in_channels: int = 3

    @property
    def scale(self) -> int:
        return 2 ** self.upscale_stages

    def validate(self) -> None:
        if self.num_residual_blocks < 1:
            raise ConfigurationError("generator needs at least one residual block")
        if self.channels < 1 or self.in_channels < 1:
            raise ConfigurationError("channel counts must be positive")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError("kernel size must be odd for same-padding")
        if self.upscale_stages < 0:
            raise ConfigurationError("upscale_stages must be >= 0")


@dataclass(frozen=True)
class DiscriminatorConfig:
    conv_channels: Tuple[int, ...] = DEFAULT_DISC_CHANNELS
    leaky_slope: float = 0.2
    dense_units: int = 1024
    input_size: int = 96
    in_channels: int = 3
    # "pre_bn" captures conv output before batch-norm and activation;
    # "post_bn" captures it after batch-norm but before activation.
    tap_position: str = "pre_bn"

    def validate(self) -> None:
        if len(self.conv_channels) != 8:
            raise ConfigurationError("discriminator must have exactly 8 conv blocks")
        if any(c < 1 for c in self.conv_channels):
            raise ConfigurationError("conv channel counts must be positive")
        if list(self.conv_channels) != sorted(self.conv_channels):
            raise ConfigurationError("conv channels must be non-decreasing")
        if self.dense_units < 1:
            raise ConfigurationError("dense_units must be positive")
        n_stride2 = len(self.conv_channels) // 2
        if self.input_size % (2 ** n_stride2) != 0:
            raise ConfigurationError("input_size must be divisible by 16")
        if self.tap_position not in ("pre_bn", "post_bn"):
            raise ConfigurationError(f"unknown tap position {self.tap_position!r}")


@dataclass
class FeatureTaps:
    """Ordered pre-activation feature maps, one per discriminator conv block."""

    maps: List[Tensor]

    def __post_init__(self) -> None:
        if len(self.maps) != 8:
            raise InputError(f"expected 8 feature taps, got {len(self.maps)}")

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, i: int) -> Tensor:
        return self.maps[i]

    @property
    def spatial_sizes(self) -> List[Tuple[int, int]]:
        return [tuple(m.shape[-2:]) for m in self.maps]


def pixel_shuffle(features: Tensor, r: int) -> Tensor:
    """Rearrange an (..., C*r*r, H, W) tensor into (..., C, H*r, W*r).

    Pure rearrangement: out[c, r*y+dy, r*x+dx] = in[c*r*r + dy*r + dx, y, x].
    """
    if r < 1:
        raise InputError("upscale factor must be >= 1")
    *lead, c_r2, h, w = features.shape
    if c_r2 % (r * r) != 0:
        raise InputError(f"channel count {c_r2} not divisible by r^2={r * r}")
    c = c_r2 // (r * r)
    x = features.reshape(*lead, c, r, r, h, w)
    x = x.movedim((-4, -3), (-3, -1))  # (..., c, h, r, w, r)
    return x.reshape(*lead, c, h * r, w * r)


def pixel_unshuffle(features: Tensor, r: int) -> Tensor:
    """Inverse of :func:`pixel_shuffle`."""
    if r < 1:
        raise InputError("upscale factor must be >= 1")
    *lead, c, hr, wr = features.shape
    if hr % r != 0 or wr % r != 0:
        raise InputError(f"spatial dims ({hr}, {wr}) not divisible by r={r}")
    h, w = hr // r, wr // r
    x = features.reshape(*lead, c, h, r, w, r)
    x = x.movedim((-3, -1), (-4, -3))
    return x.reshape(*lead, c * r * r, h, w)


class ResidualBlock(nn.Module):
    """conv -> LeakyReLU -> conv with an identity skip; no normalization."""

    def __init__(self, channels: int, kernel_size: int, leaky_slope: float):
        super().__init__()
        pad = kernel_size // 2
        self.conv1 = nn.Conv2d(channels, channels, kernel_size, padding=pad)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size, padding=pad)
        self.act = nn.LeakyReLU(leaky_slope)

    def forward(self, x: Tensor) -> Tensor:
        return x + self.conv2(self.act(self.conv1(x)))


class UpsampleStage(nn.Module):
    """Sub-pixel convolution doubling the spatial resolution."""

    def __init__(self, channels: int, kernel_size: int, leaky_slope: float):
        super().__init__()
        pad = kernel_size // 2
        self.conv = nn.Conv2d(channels, channels * 4, kernel_size, padding=pad)
        self.act = nn.LeakyReLU(leaky_slope)

    def forward(self, x: Tensor) -> Tensor:
        return self.act(pixel_shuffle(self.conv(x), 2))


class Generator(nn.Module):
    """Maps an LR batch (N, C, h, w) to an SR batch (N, C, scale*h, scale*w)."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        config.validate()
        self.config = config
        c, f, k = config.in_channels, config.channels, config.kernel_size
        pad = k // 2
        self.head = nn.Conv2d(c, f, k, padding=pad)
        self.head_act = nn.LeakyReLU(config.leaky_slope)
        self.blocks = nn.Sequential(
            *[ResidualBlock(f, k, config.leaky_slope)
              for _ in range(config.num_residual_blocks)]
        )
        self.trunk_conv = nn.Conv2d(f, f, k, padding=pad)
        self.upsample = nn.Sequential(
            *[UpsampleStage(f, k, config.leaky_slope)
              for _ in range(config.upscale_stages)]
        )
        self.tail = nn.Conv2d(f, c, k, padding=pad)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4:
            raise InputError(f"expected a (N, C, H, W) batch, got shape {tuple(x.shape)}")
        if x.shape[1] != self.config.in_channels:
            raise InputError(
                f"expected {self.config.in_channels} input channels, got {x.shape[1]}"
            )
        if x.shape[-2] < 1 or x.shape[-1] < 1:
            raise InputError("spatial dimensions must be >= 1")
        feat = self.head_act(self.head(x))
        feat = feat + self.trunk_conv(self.blocks(feat))
        feat = self.upsample(feat)
        return self.tail(feat)


class DiscriminatorBlock(nn.Module):
    """One conv block; returns (activated output, pre-activation tap)."""

    def __init__(self, in_ch: int, out_ch: int, stride: int, leaky_slope: float,
                 batch_norm: bool, tap_position: str):
        super().__init__()
        kernel = 3 if stride == 1 else 4
        self.conv = nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=1)
        self.bn = nn.BatchNorm2d(out_ch) if batch_norm else None
        self.act = nn.LeakyReLU(leaky_slope)
        self.tap_position = tap_position

    def forward(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        out = self.conv(x)
        if self.tap_position == "pre_bn":
            tap = out
            if self.bn is not None:
                out = self.bn(out)
        else:
            if self.bn is not None:
                out = self.bn(out)
            tap = out
        return self.act(out), tap


class Discriminator(nn.Module):
    """Real/fake classifier over HR-sized patches with feature taps.

    Blocks alternate (3x3, stride 1) and (4x4, stride 2) convs; channel width
    follows ``config.conv_channels``. The first block carries no batch norm.
    The head is two dense layers ending in a sigmoid probability.
    """

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        config.validate()
        self.config = config
        blocks = []
        in_ch = config.in_channels
        for i, out_ch in enumerate(config.conv_channels):
            stride = 1 if i % 2 == 0 else 2
            blocks.append(DiscriminatorBlock(
                in_ch, out_ch, stride, config.leaky_slope,
                batch_norm=(i > 0), tap_position=config.tap_position,
            ))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        n_stride2 = len(config.conv_channels) // 2
        feat_hw = config.input_size // (2 ** n_stride2)
        self.dense1 = nn.Linear(in_ch * feat_hw * feat_hw, config.dense_units)
        self.act = nn.LeakyReLU(config.leaky_slope)
        self.dense2 = nn.Linear(config.dense_units, 1)

    def forward(self, x: Tensor) -> Tuple[Tensor, FeatureTaps]:
        if x.ndim != 4:
            raise InputError(f"expected a (N, C, H, W) batch, got shape {tuple(x.shape)}")
        size = self.config.input_size
        if x.shape[-2] != size or x.shape[-1] != size:
            raise InputError(
                f"discriminator expects {size}x{size} inputs, got "
                f"{x.shape[-2]}x{x.shape[-1]}"
            )
        taps = []
        out = x
        for block in self.blocks:
            out, tap = block(out)
            taps.append(tap)
        out = self.act(self.dense1(out.flatten(1)))
        logit = self.dense2(out).squeeze(-1)
        prob = torch.sigmoid(logit).clamp(1e-7, 1 - 1e-7)
        return prob, FeatureTaps(taps)

    def tap_spatial_sizes(self) -> List[int]:
        """Spatial side length of each tap for a config-sized input."""
        sizes = []
        side = self.config.input_size
        for i in range(len(self.config.conv_channels)):
            if i % 2 == 1:
                side = (side + 2 * 1 - 4) // 2 + 1
            sizes.append(side)
        return sizes


def build_generator(config: GeneratorConfig = GeneratorConfig()) -> Generator:
    return Generator(config)


def build_discriminator(config: DiscriminatorConfig = DiscriminatorConfig()) -> Discriminator:
    return Discriminator(config)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
