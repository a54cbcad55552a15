"""Full-reference image quality metrics and the benchmark evaluation harness.

PSNR, SSIM, and VIF operate on float arrays with an explicit peak value. The
benchmark harness follows the dominant SR evaluation convention: metrics are
computed on the luma channel of an ITU-R BT.601 YCbCr transform after cropping
a scale-sized border; an RGB mode is available. The convention is recorded in
every report header.

The VIF implementation is the pixel-domain multi-scale variant (Gaussian
scale space, four scales, noise variance 2 on a [0, 255] intensity scale).
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import correlate

from .errors import InputError

PSNR_INF_SENTINEL = math.inf


def _check_pair(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf sentinel when the images match."""
    if peak <= 0:
        raise InputError("peak must be positive")
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_INF_SENTINEL
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2 * sigma * sigma))
    win = np.outer(g, g)
    return win / win.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    out = correlate(img, win, mode="constant")
    half_h, half_w = win.shape[0] // 2, win.shape[1] // 2
    return out[half_h: img.shape[0] - half_h, half_w: img.shape[1] - half_w]


def ssim(a: np.ndarray, b: np.ndarray, peak: float = 1.0,
         window_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over local Gaussian windows.

    Grayscale inputs are compared directly; for multi-channel inputs the
    per-channel SSIM values are averaged. Symmetric in (a, b) and 1 iff a == b.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 3:
        return float(np.mean([
            ssim(a[..., c], b[..., c], peak, window_size, sigma, k1, k2)
            for c in range(a.shape[-1])
        ]))
    if a.shape[0] < window_size or a.shape[1] < window_size:
        raise InputError(
            f"image {a.shape} smaller than the {window_size}x{window_size} window"
        )
    win = _gaussian_window(window_size, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mu1 = _filter_valid(a, win)
    mu2 = _filter_valid(b, win)
    mu1_sq, mu2_sq, mu1_mu2 = mu1 * mu1, mu2 * mu2, mu1 * mu2
    sigma1_sq = _filter_valid(a * a, win) - mu1_sq
    sigma2_sq = _filter_valid(b * b, win) - mu2_sq
    sigma12 = _filter_valid(a * b, win) - mu1_mu2
    ssim_map = ((2 * mu1_mu2 + c1) * (2 * sigma12 + c2)) / (
        (mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2)
    )
    return float(ssim_map.mean())


def vif(ref: np.ndarray, dist: np.ndarray, peak: float = 1.0) -> float:
    """Pixel-domain visual information fidelity over four Gaussian scales.

    Color inputs are converted to luma internally. The natural-scene noise
    variance is fixed at 2 on a [0, 255] scale, so inputs are rescaled by
    255/peak first. Returns ~1 for identical images; for a zero-variance
    (degenerate) reference the value is 1 if the images are equal, else 0.
    """
    ref, dist = _check_pair(ref, dist)
    if ref.ndim == 3:
        ref, dist = to_luma(ref, peak), to_luma(dist, peak)
        peak = 255.0
    scale_to_255 = 255.0 / peak
    ref = ref * scale_to_255
    dist = dist * scale_to_255

    sigma_nsq = 2.0
    eps = 1e-10
    num = 0.0
    den = 0.0
    for scale in range(1, 5):
        size = 2 ** (4 - scale + 1) + 1
        win = _gaussian_window(size, size / 5.0)
        if scale > 1:
            ref = _filter_valid(ref, win)[::2, ::2]
            dist = _filter_valid(dist, win)[::2, ::2]
        if ref.shape[0] < size or ref.shape[1] < size:
            raise InputError("image too small for the 4-scale VIF pyramid")
        mu1 = _filter_valid(ref, win)
        mu2 = _filter_valid(dist, win)
        mu1_sq, mu2_sq, mu1_mu2 = mu1 * mu1, mu2 * mu2, mu1 * mu2
        sigma1_sq = np.maximum(_filter_valid(ref * ref, win) - mu1_sq, 0.0)
        sigma2_sq = np.maximum(_filter_valid(dist * dist, win) - mu2_sq, 0.0)
        sigma12 = _filter_valid(ref * dist, win) - mu1_mu2

        g = sigma12 / (sigma1_sq + eps)
        sv_sq = sigma2_sq - g * sigma12

        g = np.where(sigma1_sq < eps, 0.0, g)
        sv_sq = np.where(sigma1_sq < eps, sigma2_sq, sv_sq)
        sigma1_sq = np.where(sigma1_sq < eps, 0.0, sigma1_sq)
        g = np.where(sigma2_sq < eps, 0.0, g)
        sv_sq = np.where(sigma2_sq < eps, 0.0, sv_sq)
        sv_sq = np.where(g < 0, sigma2_sq, sv_sq)
        g = np.maximum(g, 0.0)
        sv_sq = np.maximum(sv_sq, eps)

        num += float(np.sum(np.log10(1 + g * g * sigma1_sq / (sv_sq + sigma_nsq))))
        den += float(np.sum(np.log10(1 + sigma1_sq / sigma_nsq)))
    if den == 0.0:
        return 1.0 if np.array_equal(ref, dist) else 0.0
    return num / den


def to_luma(rgb: np.ndarray, peak: float = 1.0) -> np.ndarray:
    """BT.601 luma of an RGB image, on the digital [16, 235] scale.

    Input channels are interpreted on [0, peak]; the result is in [0, 255]
    units regardless of the input peak.
    """
    rgb = np.asarray(rgb, dtype=np.float64) / peak
    if rgb.ndim != 3 or rgb.shape[-1] != 3:
        raise InputError(f"expected an HxWx3 image, got shape {rgb.shape}")
    return (65.481 * rgb[..., 0] + 128.553 * rgb[..., 1]
            + 24.966 * rgb[..., 2] + 16.0)


def crop_border(img: np.ndarray, border: int) -> np.ndarray:
    if border == 0:
        return img
    if 2 * border >= min(img.shape[0], img.shape[1]):
        raise InputError(f"border {border} leaves no pixels on shape {img.shape}")
    return img[border: img.shape[0] - border, border: img.shape[1] - border]


@dataclass
class EvalConvention:
    """How image pairs are reduced before metric computation."""

    channel: str = "luma601"  # or "rgb"
    border_crop: int = 4
    quantize: bool = True  # round to 8-bit levels before comparing

    def header(self) -> dict:
        return {
            "channel": self.channel,
            "border_crop": self.border_crop,
            "quantize": self.quantize,
            "vif": "pixel-domain-4scale",
        }


def metric_triple(sr: np.ndarray, hr: np.ndarray,
                  convention: EvalConvention = EvalConvention()
                  ) -> Tuple[float, float, float]:
    """(psnr_db, ssim, vif) of one [0, 1] RGB image pair under a convention."""
    sr, hr = _check_pair(sr, hr)
    if convention.quantize:
        sr = np.rint(np.clip(sr, 0, 1) * 255.0) / 255.0
        hr = np.rint(np.clip(hr, 0, 1) * 255.0) / 255.0
    if convention.channel == "luma601":
        sr_m, hr_m = to_luma(sr), to_luma(hr)
        peak = 255.0
    elif convention.channel == "rgb":
        sr_m, hr_m, peak = sr, hr, 1.0
    else:
        raise InputError(f"unknown evaluation channel {convention.channel!r}")
    sr_m = crop_border(sr_m, convention.border_crop)
    hr_m = crop_border(hr_m, convention.border_crop)
    return (
        psnr(sr_m, hr_m, peak),
        ssim(sr_m, hr_m, peak),
        vif(hr_m, sr_m, peak),
    )


@dataclass
class MetricReport:
    """Per-image metric rows plus aggregate means for one dataset."""

    dataset: str
    convention: dict
    rows: List[dict] = field(default_factory=list)
    missing: List[str] = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([r["psnr_db"] for r in self.rows]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([r["ssim"] for r in self.rows]))

    @property
    def mean_vif(self) -> float:
        return float(np.mean([r["vif"] for r in self.rows]))

    def summary(self) -> dict:
        return {
            "dataset": self.dataset,
            "convention": self.convention,
            "n_images": len(self.rows),
            "missing": self.missing,
            "mean": {"psnr_db": self.mean_psnr, "ssim": self.mean_ssim,
                     "vif": self.mean_vif},
        }

    def to_json(self) -> str:
        return json.dumps({**self.summary(), "rows": self.rows}, indent=2)

    def save_json(self, path) -> None:
        Path(path).write_text(self.to_json())

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image", "psnr_db", "ssim", "vif"])
            for r in self.rows:
                writer.writerow([r["image"], r["psnr_db"], r["ssim"], r["vif"]])


def evaluate_benchmark(sr_source, hr_dir, dataset: str = "",
                       convention: EvalConvention = EvalConvention(),
                       scale: int = 4) -> MetricReport:
    """Evaluate super-resolved images against an HR directory.

    ``sr_source`` is either a directory of precomputed SR images (aligned to
    the HR images by filename stem) or a callable mapping a [0, 1] HWC LR
    array to an SR array (e.g. a trained model wrapper); with a callable, the
    LR input is synthesized from each HR image by bicubic downscaling. HR
    images lacking a counterpart are listed in the report and excluded from
    the means.
    """
    from .data import IMAGE_SUFFIXES, downscale_bicubic, load_image

    hr_dir = Path(hr_dir)
    hr_paths = sorted(p for p in hr_dir.iterdir()
                      if p.suffix.lower() in IMAGE_SUFFIXES)
    if not hr_paths:
        raise InputError(f"no HR images under {hr_dir}")
    sr_by_stem = None
    if not callable(sr_source):
        sr_dir = Path(sr_source)
        sr_by_stem = {p.stem: p for p in sr_dir.iterdir()
                      if p.suffix.lower() in IMAGE_SUFFIXES}
    report = MetricReport(dataset=dataset or hr_dir.name,
                          convention=convention.header())
    for hr_path in hr_paths:
        hr = load_image(hr_path)
        if sr_by_stem is not None:
            sr_path = sr_by_stem.get(hr_path.stem)
            if sr_path is None:
                report.missing.append(hr_path.name)
                continue
            sr = load_image(sr_path)
        else:
            h, w = hr.shape[:2]
            hr = hr[: h - h % scale, : w - w % scale]
            sr = np.clip(sr_source(downscale_bicubic(hr, scale)), 0.0, 1.0)
        if sr.shape != hr.shape:
            report.missing.append(hr_path.name)
            continue
        p, s, v = metric_triple(sr, hr, convention)
        report.rows.append(
            {"image": hr_path.name, "psnr_db": p, "ssim": s, "vif": v}
        )
    if not report.rows:
        raise InputError("no aligned SR/HR pairs found")
    return report
