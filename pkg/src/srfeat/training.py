"""Alternating generator/discriminator optimization.

One step = one discriminator update on the opposing objective (skipped for
presets without an adversarial term) followed by one generator update on the
preset's weighted total. Both networks use Adam with a stepped learning-rate
schedule: the initial rate is divided by 10 after every 200 epochs, where an
epoch is a configurable number of updates (one corpus pass by default).

Checkpoints are single-file archives of named arrays plus a JSON manifest
(config, update counter, RNG states); saving and resuming reproduces the next
step's losses bit-near.
"""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import torch
from torch import Tensor, nn

from . import losses as L
from .archive import load_archive, save_archive
from .data import DatasetIndex, sample_batch
from .errors import ConfigurationError, InputError, NumericError
from .features import build_extractor
from .losses import ContentCalibration, LossBreakdown, LossWeights, Preset, resolve_preset
from .models import (Discriminator, DiscriminatorConfig, Generator,
                     GeneratorConfig, build_discriminator, build_generator)

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "M_pcsva"
    batch: int = 16
    total_updates: int = 200_000
    lr0: float = 1e-4
    lr_decay: float = 0.1
    decay_every_epochs: int = 200
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_interval: int = 10_000
    epoch_len: Optional[int] = None  # updates per epoch; default ceil(corpus/batch)
    hr_patch: int = 96
    scale_factor: int = 4
    zero_center: bool = True
    extractor: str = "random"  # identity | random | path to a weight archive
    extractor_layer: int = 16
    extractor_width: float = 1.0
    softmax_on: str = "calibrated"
    loss_weights: LossWeights = LossWeights()
    generator: GeneratorConfig = GeneratorConfig()
    discriminator: DiscriminatorConfig = DiscriminatorConfig()

    def resolved_preset(self) -> Preset:
        return resolve_preset(self.preset)

    def epoch_updates(self, corpus_size: int) -> int:
        if self.epoch_len is not None:
            if self.epoch_len < 1:
                raise ConfigurationError("epoch_len must be >= 1")
            return self.epoch_len
        return max(1, math.ceil(corpus_size / self.batch))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["adam_betas"] = tuple(d["adam_betas"])
        d["loss_weights"] = LossWeights(**d["loss_weights"])
        gen = dict(d["generator"])
        d["generator"] = GeneratorConfig(**gen)
        disc = dict(d["discriminator"])
        disc["conv_channels"] = tuple(disc["conv_channels"])
        d["discriminator"] = DiscriminatorConfig(**disc)
        return cls(**d)


def tiny_config(preset: str = "M_p", seed: int = 0, **overrides) -> TrainConfig:
    """Desk-scale config: 2 residual blocks and narrow widths, CPU-friendly."""
    defaults = dict(
        preset=preset,
        batch=8,
        seed=seed,
        epoch_len=10_000,  # desk runs never reach the first decay
        checkpoint_interval=10_000,
        extractor="random",
        extractor_layer=4,
        extractor_width=0.125,
        generator=GeneratorConfig(num_residual_blocks=2, channels=16),
        discriminator=DiscriminatorConfig(
            conv_channels=(16, 16, 32, 32, 64, 64, 128, 128), dense_units=64
        ),
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


def msra_init_(model: nn.Module, post_scale: float = 0.1,
               generator: Optional[torch.Generator] = None) -> nn.Module:
    """Variance-scaled normal init for rectifier nets, then multiply by
    ``post_scale``; biases zero, norm layers identity."""
    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
        elif isinstance(m, nn.Linear):
            fan_in = m.in_features
        elif isinstance(m, nn.BatchNorm2d):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
            continue
        else:
            continue
        std = math.sqrt(2.0 / fan_in) * post_scale
        with torch.no_grad():
            m.weight.normal_(0.0, std, generator=generator)
            if m.bias is not None:
                m.bias.zero_()
    return model


def lr_at(update: int, epoch_len: int, lr0: float = 1e-4,
          decay: float = 0.1, every_epochs: int = 200) -> float:
    """Learning rate for a given update counter."""
    if epoch_len < 1:
        raise InputError("epoch_len must be >= 1")
    epoch = update // epoch_len
    return lr0 * decay ** (epoch // every_epochs)


@dataclass
class TrainState:
    config: TrainConfig
    preset: Preset
    generator: Generator
    discriminator: Discriminator
    extractor: nn.Module
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    rng: np.random.Generator
    update: int = 0
    epoch_len: int = 1
    calibration: Optional[ContentCalibration] = None
    channel_mean: Optional[Tuple[float, float, float]] = None

    @property
    def epoch(self) -> int:
        return self.update // self.epoch_len


def init_state(config: TrainConfig, corpus_size: int = 1,
               channel_mean: Optional[Tuple[float, float, float]] = None
               ) -> TrainState:
    preset = config.resolved_preset()
    gen_rng = torch.Generator().manual_seed(config.seed)
    generator = build_generator(config.generator)
    msra_init_(generator, post_scale=0.1, generator=gen_rng)
    discriminator = build_discriminator(config.discriminator)
    msra_init_(discriminator, post_scale=0.1, generator=gen_rng)
    extractor = build_extractor(config.extractor, seed=config.seed,
                                layer_index=config.extractor_layer,
                                width_mult=config.extractor_width)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.lr0,
                             betas=config.adam_betas, eps=config.adam_eps)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr0,
                             betas=config.adam_betas, eps=config.adam_eps)
    return TrainState(
        config=config,
        preset=preset,
        generator=generator,
        discriminator=discriminator,
        extractor=extractor,
        opt_g=opt_g,
        opt_d=opt_d,
        rng=np.random.default_rng(config.seed),
        epoch_len=config.epoch_updates(corpus_size),
        channel_mean=channel_mean,
    )


def calibrate_content(state: TrainState, lr_batch: Tensor, hr_batch: Tensor
                      ) -> ContentCalibration:
    """Estimate per-layer content scales from one warm-up batch, untrained."""
    with torch.no_grad():
        sr = state.generator(lr_batch)
        _, taps_sr = state.discriminator(sr)
        _, taps_hr = state.discriminator(hr_batch)
        layer = L.content_layer_losses(taps_sr, taps_hr)
    calib = ContentCalibration.from_warmup(layer)
    state.calibration = calib
    return calib


def _set_lr(optimizer: torch.optim.Optimizer, lr: float) -> None:
    for group in optimizer.param_groups:
        group["lr"] = lr


def train_step(state: TrainState, lr_batch: Tensor, hr_batch: Tensor
               ) -> LossBreakdown:
    """One discriminator update (when the preset has an adversarial term)
    followed by one generator update on the preset's components."""
    cfg, preset = state.config, state.preset
    lr = lr_at(state.update, state.epoch_len, cfg.lr0, cfg.lr_decay,
               cfg.decay_every_epochs)
    _set_lr(state.opt_g, lr)
    _set_lr(state.opt_d, lr)

    d_loss_val: Optional[float] = None
    if preset.trains_discriminator:
        with torch.no_grad():
            sr_detached = state.generator(lr_batch)
        p_fake, _ = state.discriminator(sr_detached)
        p_real, _ = state.discriminator(hr_batch)
        d_loss = L.discriminator_loss(p_fake, p_real)
        if not torch.isfinite(d_loss):
            raise NumericError(f"non-finite discriminator loss at update {state.update}")
        state.opt_d.zero_grad(set_to_none=True)
        d_loss.backward()
        state.opt_d.step()
        d_loss_val = float(d_loss.detach())

    sr = state.generator(lr_batch)
    point = L.huber_loss(sr, hr_batch)
    vgg = adv = content_total = None
    content_layers = softmax_weights = None
    if preset.vgg:
        vgg = L.perceptual_loss(state.extractor, sr, hr_batch)
    if preset.adv or preset.content:
        p_fake, taps_fake = state.discriminator(sr)
        if preset.adv:
            adv = L.adversarial_gen_loss(p_fake)
        if preset.content:
            with torch.no_grad():
                _, taps_real = state.discriminator(hr_batch)
            content_layers = L.content_layer_losses(taps_fake, taps_real)
            if state.calibration is None:
                raise ConfigurationError(
                    "content preset requires calibration; run calibrate_content first"
                )
            if preset.softmax:
                content_total, softmax_weights = L.softmax_reweighed_content_loss(
                    content_layers, state.calibration, softmax_on=cfg.softmax_on
                )
            else:
                content_total, softmax_weights = L.uniform_content_loss(
                    content_layers, state.calibration
                )
    total, breakdown = L.total_generator_loss(
        point=point, vgg=vgg, adv=adv, content_total=content_total,
        weights=cfg.loss_weights, content_layers=content_layers,
        softmax_weights=softmax_weights,
    )
    state.opt_g.zero_grad(set_to_none=True)
    state.opt_d.zero_grad(set_to_none=True)
    total.backward()
    state.opt_g.step()

    breakdown.d_loss = d_loss_val
    breakdown.update = state.update
    breakdown.validate()
    state.update += 1
    return breakdown


def sample_torch_batch(state: TrainState, index: DatasetIndex
                       ) -> Tuple[Tensor, Tensor]:
    lr_np, hr_np = sample_batch(
        index, state.rng, state.config.batch, hr_patch=state.config.hr_patch,
        factor=state.config.scale_factor, center=state.config.zero_center,
    )
    return torch.from_numpy(lr_np).float(), torch.from_numpy(hr_np).float()


def run_training(config: TrainConfig, index: DatasetIndex, out_dir,
                 updates: Optional[int] = None, log_file: str = "loss_log.jsonl",
                 resume_from=None) -> TrainState:
    """Train for ``updates`` steps (default ``config.total_updates``), logging
    one breakdown JSON line per step and checkpointing periodically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mean = index.channel_mean if config.zero_center else None
    if resume_from is not None:
        state = load_checkpoint(resume_from, config=config)
    else:
        state = init_state(config, corpus_size=len(index), channel_mean=mean)
        if state.preset.content:
            warm_rng = np.random.default_rng(config.seed + 0x5EED)
            lr_np, hr_np = sample_batch(index, warm_rng, config.batch,
                                        hr_patch=config.hr_patch,
                                        factor=config.scale_factor,
                                        center=config.zero_center)
            calibrate_content(state, torch.from_numpy(lr_np).float(),
                              torch.from_numpy(hr_np).float())
    total = updates if updates is not None else config.total_updates
    ckpt_path = out_dir / "checkpoint.srz"
    with open(out_dir / log_file, "a") as log:
        while state.update < total:
            lr_batch, hr_batch = sample_torch_batch(state, index)
            breakdown = train_step(state, lr_batch, hr_batch)
            log.write(breakdown.to_json_line() + "\n")
            if (state.update % config.checkpoint_interval == 0
                    or state.update == total):
                save_checkpoint(state, ckpt_path)
    save_checkpoint(state, ckpt_path)
    return state


def _optimizer_arrays(opt: torch.optim.Adam, prefix: str,
                      arrays: Dict[str, np.ndarray]) -> None:
    for i, group_state in enumerate(_flat_opt_state(opt)):
        for key, value in group_state.items():
            arrays[f"{prefix}/{i}.{key}"] = value


def _flat_opt_state(opt: torch.optim.Adam):
    params = [p for group in opt.param_groups for p in group["params"]]
    out = []
    for p in params:
        st = opt.state.get(p, {})
        entry = {}
        if st:
            step = st["step"]
            entry["step"] = np.asarray(
                float(step) if isinstance(step, Tensor) else step
            )
            entry["exp_avg"] = st["exp_avg"].detach().numpy()
            entry["exp_avg_sq"] = st["exp_avg_sq"].detach().numpy()
        out.append(entry)
    return out


def _restore_opt_state(opt: torch.optim.Adam, prefix: str,
                       arrays: Dict[str, np.ndarray]) -> None:
    params = [p for group in opt.param_groups for p in group["params"]]
    for i, p in enumerate(params):
        key = f"{prefix}/{i}.step"
        if key not in arrays:
            continue
        opt.state[p] = {
            "step": torch.tensor(float(arrays[key].ravel()[0])),
            "exp_avg": torch.from_numpy(arrays[f"{prefix}/{i}.exp_avg"].copy()),
            "exp_avg_sq": torch.from_numpy(arrays[f"{prefix}/{i}.exp_avg_sq"].copy()),
        }


def _module_arrays(module: nn.Module, prefix: str,
                   arrays: Dict[str, np.ndarray]) -> None:
    for name, tensor in module.state_dict().items():
        arrays[f"{prefix}/{name}"] = tensor.detach().cpu().numpy()


def _restore_module(module: nn.Module, prefix: str,
                    arrays: Dict[str, np.ndarray]) -> None:
    state = {}
    for name, tensor in module.state_dict().items():
        key = f"{prefix}/{name}"
        if key not in arrays:
            raise InputError(f"checkpoint missing array {key}")
        state[name] = torch.from_numpy(arrays[key].copy()).to(tensor.dtype)
    module.load_state_dict(state)


def save_checkpoint(state: TrainState, path) -> None:
    """Write the full training state as a named-array archive."""
    arrays: Dict[str, np.ndarray] = {}
    _module_arrays(state.generator, "generator", arrays)
    _module_arrays(state.discriminator, "discriminator", arrays)
    _optimizer_arrays(state.opt_g, "opt_g", arrays)
    _optimizer_arrays(state.opt_d, "opt_d", arrays)
    arrays["rng/torch"] = torch.get_rng_state().numpy()
    if state.calibration is not None:
        arrays["calibration/scale"] = np.asarray(state.calibration.scale)
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "train_state",
        "update": state.update,
        "epoch_len": state.epoch_len,
        "seed": state.config.seed,
        "config": state.config.to_dict(),
        "numpy_rng": _encode_np_rng(state.rng),
        "channel_mean": list(state.channel_mean) if state.channel_mean else None,
    }
    save_archive(path, arrays, manifest)


def _encode_np_rng(rng: np.random.Generator) -> dict:
    st = rng.bit_generator.state
    return {"bit_generator": st["bit_generator"],
            "state": {k: str(v) for k, v in st["state"].items()},
            "has_uint32": st["has_uint32"], "uinteger": st["uinteger"]}


def _decode_np_rng(encoded: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    rng.bit_generator.state = {
        "bit_generator": encoded["bit_generator"],
        "state": {k: int(v) for k, v in encoded["state"].items()},
        "has_uint32": encoded["has_uint32"],
        "uinteger": encoded["uinteger"],
    }
    return rng


def load_checkpoint(path, config: Optional[TrainConfig] = None) -> TrainState:
    """Rebuild a training state from an archive.

    When ``config`` is given it must match the checkpoint's stored config;
    mismatches raise a ConfigurationError listing the differing keys.
    """
    arrays, manifest = load_archive(path)
    if manifest.get("kind") != "train_state":
        raise InputError(f"{path} is not a training checkpoint")
    stored = TrainConfig.from_dict(manifest["config"])
    if config is not None and config != stored:
        diff = _config_diff(config.to_dict(), stored.to_dict())
        raise ConfigurationError(f"checkpoint config mismatch: {diff}")
    state = init_state(stored)
    _restore_module(state.generator, "generator", arrays)
    _restore_module(state.discriminator, "discriminator", arrays)
    _restore_opt_state(state.opt_g, "opt_g", arrays)
    _restore_opt_state(state.opt_d, "opt_d", arrays)
    torch.set_rng_state(torch.from_numpy(arrays["rng/torch"].copy()))
    if "calibration/scale" in arrays:
        state.calibration = ContentCalibration(
            scale=tuple(float(s) for s in arrays["calibration/scale"])
        )
    state.update = manifest["update"]
    state.epoch_len = manifest["epoch_len"]
    state.rng = _decode_np_rng(manifest["numpy_rng"])
    mean = manifest.get("channel_mean")
    state.channel_mean = tuple(mean) if mean else None
    return state


def _config_diff(a: dict, b: dict, prefix: str = "") -> list:
    diffs = []
    for key in sorted(set(a) | set(b)):
        va, vb = a.get(key), b.get(key)
        if isinstance(va, dict) and isinstance(vb, dict):
            diffs.extend(_config_diff(va, vb, prefix + key + "."))
        elif va != vb:
            diffs.append(f"{prefix}{key}: {va!r} != {vb!r}")
    return diffs


def super_resolve(state: TrainState, img: np.ndarray) -> np.ndarray:
    """Upscale one [0, 1] HWC image with the trained generator."""
    mean = (np.asarray(state.channel_mean)
            if state.config.zero_center and state.channel_mean else 0.0)
    x = torch.from_numpy((img - mean).transpose(2, 0, 1)[None]).float()
    state.generator.eval()
    try:
        with torch.no_grad():
            out = state.generator(x)[0].numpy().transpose(1, 2, 0)
    finally:
        state.generator.train()
    return np.clip(out + mean, 0.0, 1.0)
