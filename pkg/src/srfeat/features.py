"""Perceptual feature extractors.

The default extractor mirrors the 19-layer VGG conv stack (16 conv layers in
five groups, max-pooling between groups) and returns the pre-activation output
of a configurable conv layer; the deepest conv layer is the default. Weights
are loaded from an array archive, never trained here. For desk-scale runs a
seeded random extractor is available; random projections still define a valid
perceptual distance.
"""

from typing import List

import numpy as np
import torch
from torch import Tensor, nn

from .archive import load_archive, save_archive
from .errors import ConfigurationError, InputError

# (channels, convs) per group of the 19-layer configuration
VGG19_PLAN = ((64, 2), (128, 2), (256, 4), (512, 4), (512, 4))
NUM_CONV_LAYERS = sum(n for _, n in VGG19_PLAN)


class IdentityFeatures(nn.Module):
    """Pass-through extractor; the perceptual loss degenerates to pixel MSE."""

    def forward(self, x: Tensor) -> Tensor:
        return x


class VggFeatures(nn.Module):
    """VGG19-style conv stack returning one pre-activation feature map.

    ``layer_index`` counts conv layers from 1; the default (16) is the deepest
    conv output, taken before its activation. ``width_mult`` scales every
    channel width, for cheap desk-scale extractors.
    """

    def __init__(self, layer_index: int = NUM_CONV_LAYERS, width_mult: float = 1.0,
                 in_channels: int = 3):
        super().__init__()
        if not 1 <= layer_index <= NUM_CONV_LAYERS:
            raise ConfigurationError(
                f"layer_index must be in [1, {NUM_CONV_LAYERS}], got {layer_index}"
            )
        self.layer_index = layer_index
        self.width_mult = width_mult
        layers: List[nn.Module] = []
        convs_seen = 0
        prev = in_channels
        for group, (width, n_convs) in enumerate(VGG19_PLAN):
            ch = max(1, int(round(width * width_mult)))
            for _ in range(n_convs):
                layers.append(nn.Conv2d(prev, ch, 3, padding=1))
                convs_seen += 1
                prev = ch
                if convs_seen == layer_index:
                    self.stack = nn.Sequential(*layers)
                    return
                layers.append(nn.ReLU(inplace=True))
            if group < len(VGG19_PLAN) - 1:
                layers.append(nn.MaxPool2d(2))
        raise AssertionError("unreachable")

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 4:
            raise InputError(f"expected a (N, C, H, W) batch, got shape {tuple(x.shape)}")
        return self.stack(x)

    @classmethod
    def random_init(cls, seed: int, layer_index: int = NUM_CONV_LAYERS,
                    width_mult: float = 1.0, in_channels: int = 3) -> "VggFeatures":
        model = cls(layer_index, width_mult, in_channels)
        gen = torch.Generator().manual_seed(seed)
        for m in model.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                std = (2.0 / fan_in) ** 0.5
                with torch.no_grad():
                    m.weight.normal_(0.0, std, generator=gen)
                    m.bias.zero_()
        for p in model.parameters():
            p.requires_grad_(False)
        model.eval()
        return model

    @classmethod
    def from_file(cls, path, layer_index: int = NUM_CONV_LAYERS) -> "VggFeatures":
        """Load extractor weights from an array archive written by save_weights."""
        try:
            arrays, manifest = load_archive(path)
        except InputError as exc:
            raise ConfigurationError(f"extractor weights unavailable: {exc}") from exc
        model = cls(
            layer_index=layer_index,
            width_mult=manifest.get("width_mult", 1.0),
            in_channels=manifest.get("in_channels", 3),
        )
        state = model.state_dict()
        missing = sorted(set(state) - set(arrays))
        if missing:
            raise ConfigurationError(f"extractor archive missing arrays: {missing}")
        for name in state:
            tensor = torch.from_numpy(arrays[name])
            if tensor.shape != state[name].shape:
                raise ConfigurationError(
                    f"extractor array {name} has shape {tuple(tensor.shape)}, "
                    f"expected {tuple(state[name].shape)}"
                )
            state[name] = tensor
        model.load_state_dict(state)
        for p in model.parameters():
            p.requires_grad_(False)
        model.eval()
        return model

    def save_weights(self, path) -> None:
        arrays = {k: v.detach().numpy() for k, v in self.state_dict().items()}
        manifest = {
            "kind": "vgg_features",
            "layer_index": self.layer_index,
            "width_mult": self.width_mult,
            "in_channels": self.stack[0].in_channels,
        }
        save_archive(path, arrays, manifest)


def build_extractor(spec: str, seed: int = 0, layer_index: int = NUM_CONV_LAYERS,
                    width_mult: float = 1.0) -> nn.Module:
    """Build an extractor from a config string.

    ``identity`` | ``random`` | a path to a weight archive.
    """
    if spec == "identity":
        return IdentityFeatures()
    if spec == "random":
        return VggFeatures.random_init(seed, layer_index, width_mult)
    return VggFeatures.from_file(spec, layer_index)
