"""Training objective: point, perceptual, adversarial, and feature-matching
content losses, plus the softmax-reweighed combination of the per-layer
content losses.

All norms are mean-reduced over every tensor dimension, so the component
weights are independent of batch and image size. The softmax weights over the
layer content losses are treated as constants in the backward pass: the
gradient of the combined content loss is the weighted sum of the per-layer
gradients, not the full softmax derivative.
"""

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import torch
from torch import Tensor

from .errors import ConfigurationError, InputError, NumericError
from .models import FeatureTaps

PROB_EPS = 1e-7
CALIBRATION_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Fixed coefficients of the total generator objective."""

    lambda_adv: float = 0.005
    eta_point: float = 0.01
    gamma_vgg: float = 0.5

    def __post_init__(self) -> None:
        if min(self.lambda_adv, self.eta_point, self.gamma_vgg) < 0:
            raise ConfigurationError("loss weights must be non-negative")


@dataclass(frozen=True)
class Preset:
    """Named subset of loss components defining one training configuration."""

    name: str
    vgg: bool
    adv: bool
    content: bool
    softmax: bool

    @property
    def trains_discriminator(self) -> bool:
        return self.adv


PRESETS = {
    "M_p": Preset("M_p", vgg=False, adv=False, content=False, softmax=False),
    "M_pva": Preset("M_pva", vgg=True, adv=True, content=False, softmax=False),
    "M_pca": Preset("M_pca", vgg=False, adv=True, content=True, softmax=False),
    "M_pcsa": Preset("M_pcsa", vgg=False, adv=True, content=True, softmax=True),
    "M_pcsva": Preset("M_pcsva", vgg=True, adv=True, content=True, softmax=True),
}


def resolve_preset(name: str) -> Preset:
    """Look up a preset by name; accepts the sigma spelling (``M_pcσa``)."""
    key = name.replace("σ", "s")
    try:
        return PRESETS[key]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def huber_loss(est: Tensor, hr: Tensor) -> Tensor:
    """Hybrid L1/L2 point-estimate loss, mean-reduced over all dimensions.

    Elementwise 0.5*e^2 for |e| < 1 and |e| - 0.5 otherwise; continuous with
    continuous first derivative at |e| = 1.
    """
    est, hr = _as_tensor(est), _as_tensor(hr)
    if est.shape != hr.shape:
        raise InputError(f"shape mismatch: {tuple(est.shape)} vs {tuple(hr.shape)}")
    err = est - hr
    abs_err = err.abs()
    per_elem = torch.where(abs_err < 1, 0.5 * err * err, abs_err - 0.5)
    return per_elem.mean()


def perceptual_loss(extractor, est: Tensor, hr: Tensor) -> Tensor:
    """Mean squared distance in the latent space of a pretrained extractor."""
    feat_est = extractor(est)
    with torch.no_grad():
        feat_hr = extractor(hr)
    if feat_est.shape != feat_hr.shape:
        raise InputError("extractor produced mismatched feature shapes")
    diff = feat_est - feat_hr
    return (diff * diff).mean()


def _clamped_probs(p: Tensor) -> Tensor:
    p = _as_tensor(p)
    if torch.isnan(p).any():
        raise NumericError("probability input contains NaN")
    p = p.clamp(PROB_EPS, 1 - PROB_EPS)
    if ((p <= 0) | (p >= 1)).any():
        raise NumericError("probabilities outside (0, 1) after clamping")
    return p


def adversarial_gen_loss(d_prob_fake: Tensor) -> Tensor:
    """Mean negative log-probability the discriminator assigns to SR outputs."""
    p = _clamped_probs(d_prob_fake)
    return (-torch.log(p)).mean()


def discriminator_loss(d_prob_fake: Tensor, d_prob_real: Tensor) -> Tensor:
    """Opposing objective: mean[-log(1 - p_fake)] + mean[-log(p_real)]."""
    p_fake = _clamped_probs(d_prob_fake)
    p_real = _clamped_probs(d_prob_real)
    return (-torch.log1p(-p_fake)).mean() + (-torch.log(p_real)).mean()


def layer_content_loss(taps_est: FeatureTaps, taps_hr: FeatureTaps, i: int) -> Tensor:
    """Mean squared distance between the i-th pre-activation feature taps.

    The HR taps are detached, so no gradient flows through the target branch.
    """
    if not 0 <= i < len(taps_est):
        raise InputError(f"tap index {i} out of range [0, {len(taps_est)})")
    est, hr = taps_est[i], taps_hr[i].detach()
    if est.shape != hr.shape:
        raise InputError(f"tap {i} shape mismatch: {tuple(est.shape)} vs {tuple(hr.shape)}")
    diff = est - hr
    return (diff * diff).mean()


def content_layer_losses(taps_est: FeatureTaps, taps_hr: FeatureTaps) -> List[Tensor]:
    return [layer_content_loss(taps_est, taps_hr, i) for i in range(len(taps_est))]


@dataclass(frozen=True)
class ContentCalibration:
    """Per-layer positive scales bringing the content losses to comparable size.

    Estimated once from a warm-up batch before training and frozen for the
    entire run.
    """

    scale: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.scale or any(s <= 0 for s in self.scale):
            raise ConfigurationError("calibration scales must be strictly positive")

    @classmethod
    def identity(cls, n: int) -> "ContentCalibration":
        return cls(scale=(1.0,) * n)

    @classmethod
    def from_warmup(cls, layer_losses: Sequence[Tensor],
                    eps: float = CALIBRATION_EPS) -> "ContentCalibration":
        return cls(scale=tuple(max(float(l), eps) for l in layer_losses))


def _combine_content(layer_losses: Sequence[Tensor], calib: ContentCalibration,
                     weights: Tensor) -> Tuple[Tensor, Tensor]:
    scaled = torch.stack([
        _as_tensor(l) / s for l, s in zip(layer_losses, calib.scale)
    ])
    total = (weights * scaled).sum()
    return total, weights


def softmax_reweighed_content_loss(
    layer_losses: Sequence[Tensor],
    calib: Optional[ContentCalibration] = None,
    softmax_on: str = "calibrated",
) -> Tuple[Tensor, Tensor]:
    """Combine per-layer content losses with stopped-gradient softmax weights.

    Each loss is divided by its calibration scale; the weights are the softmax
    of the (by default calibrated) losses, computed under ``no_grad`` so the
    backward pass sees them as constants. Returns ``(total, weights)``.

    ``softmax_on="raw"`` applies the softmax to the uncalibrated losses
    instead; the summed terms stay calibrated either way.
    """
    if len(layer_losses) == 0:
        raise InputError("need at least one layer loss")
    if calib is None:
        calib = ContentCalibration.identity(len(layer_losses))
    if len(calib.scale) != len(layer_losses):
        raise InputError("calibration length does not match number of losses")
    if softmax_on not in ("calibrated", "raw"):
        raise ConfigurationError(f"unknown softmax_on mode {softmax_on!r}")
    losses = [_as_tensor(l) for l in layer_losses]
    if any(not torch.isfinite(l).all() for l in losses):
        raise NumericError("non-finite layer content loss")
    with torch.no_grad():
        if softmax_on == "calibrated":
            basis = torch.stack([l / s for l, s in zip(losses, calib.scale)])
        else:
            basis = torch.stack(list(losses))
        # max-subtraction keeps the exponentials in range
        shifted = basis - basis.max()
        weights = shifted.exp()
        weights = weights / weights.sum()
    return _combine_content(losses, calib, weights)


def uniform_content_loss(
    layer_losses: Sequence[Tensor],
    calib: Optional[ContentCalibration] = None,
) -> Tuple[Tensor, Tensor]:
    """Plain average of the calibrated layer losses (the non-softmax variant)."""
    if len(layer_losses) == 0:
        raise InputError("need at least one layer loss")
    if calib is None:
        calib = ContentCalibration.identity(len(layer_losses))
    n = len(layer_losses)
    weights = torch.full((n,), 1.0 / n, dtype=torch.float64)
    return _combine_content(layer_losses, calib, weights)


@dataclass
class LossBreakdown:
    """Per-component scalars for one training step, JSON-serializable."""

    point: float = 0.0
    vgg: float = 0.0
    adv: float = 0.0
    content_total: float = 0.0
    total: float = 0.0
    content_layer: List[float] = field(default_factory=list)
    softmax_weight: List[float] = field(default_factory=list)
    d_loss: Optional[float] = None
    update: Optional[int] = None

    def validate(self) -> None:
        scalars = [self.point, self.vgg, self.adv, self.content_total, self.total]
        scalars += list(self.content_layer) + list(self.softmax_weight)
        if not all(math.isfinite(v) for v in scalars):
            raise NumericError(f"non-finite loss component: {self.to_json_line()}")
        if self.softmax_weight and abs(sum(self.softmax_weight) - 1.0) > 1e-6:
            raise NumericError("softmax weights do not sum to 1")

    def to_json_line(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "LossBreakdown":
        return cls(**json.loads(line))


def total_generator_loss(
    point: Optional[Tensor] = None,
    vgg: Optional[Tensor] = None,
    adv: Optional[Tensor] = None,
    content_total: Optional[Tensor] = None,
    weights: LossWeights = LossWeights(),
    content_layers: Optional[Sequence[Tensor]] = None,
    softmax_weights: Optional[Tensor] = None,
) -> Tuple[Tensor, LossBreakdown]:
    """Weighted total of the enabled components.

    total = content + lambda*adv + eta*point + gamma*vgg; a disabled (None)
    component contributes exactly zero. Returns the differentiable total and
    the recorded breakdown.
    """
    zero = torch.zeros((), dtype=torch.float64)
    terms = {
        "point": _as_tensor(point) if point is not None else zero,
        "vgg": _as_tensor(vgg) if vgg is not None else zero,
        "adv": _as_tensor(adv) if adv is not None else zero,
        "content": _as_tensor(content_total) if content_total is not None else zero,
    }
    total = (
        terms["content"]
        + weights.lambda_adv * terms["adv"]
        + weights.eta_point * terms["point"]
        + weights.gamma_vgg * terms["vgg"]
    )
    breakdown = LossBreakdown(
        point=float(terms["point"].detach()),
        vgg=float(terms["vgg"].detach()),
        adv=float(terms["adv"].detach()),
        content_total=float(terms["content"].detach()),
        total=float(total.detach()),
        content_layer=(
            [float(l.detach()) for l in content_layers] if content_layers else []
        ),
        softmax_weight=(
            [float(w) for w in softmax_weights] if softmax_weights is not None else []
        ),
    )
    breakdown.validate()
    return total, breakdown
