"""HR corpus ingestion, bicubic LR synthesis, and augmented patch sampling.

Images are decoded to float64 arrays in [0, 1], channel-last. LR counterparts
are synthesized with a separable Catmull-Rom bicubic kernel (a = -0.5); when
downscaling, the kernel support is widened by the scale factor so the resample
is anti-aliased, matching the de-facto convention for 4x SR benchmarks. Patch
pairs are cropped from the HR image, augmented with one of the 8 dihedral
symmetries, downscaled, then zero-centered with the training-split mean.
"""

import json
import logging
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .errors import InputError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".bmp", ".ppm", ".tif", ".tiff", ".jpg", ".jpeg")


def load_image(path) -> np.ndarray:
    """Decode an image file to a float64 HxWx3 array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image(path, img: np.ndarray) -> None:
    """Write a [0, 1] float array as an 8-bit image."""
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(quantized).save(path)


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    # Catmull-Rom cubic, a = -0.5
    ax = np.abs(x)
    ax2, ax3 = ax * ax, ax * ax * ax
    inner = 1.5 * ax3 - 2.5 * ax2 + 1.0
    outer = -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    return np.where(ax <= 1, inner, np.where(ax < 2, outer, 0.0))


@lru_cache(maxsize=256)
def bicubic_weights(in_len: int, out_len: int) -> np.ndarray:
    """Dense (out_len, in_len) resampling matrix for one dimension.

    Output sample j is centered at (j + 0.5) * in/out - 0.5 in input
    coordinates. For downscaling the kernel is dilated by the scale ratio
    (anti-aliasing); contributions are edge-clamped and each row sums to 1.
    The returned array is cached and read-only.
    """
    if in_len < 1 or out_len < 1:
        raise InputError("resize lengths must be >= 1")
    scale = out_len / in_len
    if scale < 1.0:
        support = 2.0 / scale

        def kernel(x):
            return scale * _cubic_kernel(scale * x)
    else:
        support = 2.0

        def kernel(x):
            return _cubic_kernel(x)

    centers = (np.arange(out_len) + 0.5) / scale - 0.5
    left = np.floor(centers - support).astype(int)
    n_taps = int(np.ceil(2 * support)) + 2
    offsets = np.arange(n_taps)
    idx = left[:, None] + offsets[None, :]
    w = kernel(centers[:, None] - idx)
    w /= w.sum(axis=1, keepdims=True)
    matrix = np.zeros((out_len, in_len))
    np.add.at(matrix, (np.repeat(np.arange(out_len), n_taps),
                       np.clip(idx, 0, in_len - 1).ravel()), w.ravel())
    matrix.setflags(write=False)
    return matrix


def resize_bicubic(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Separable bicubic resize of an HxW or HxWxC array."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    rows = bicubic_weights(h, out_h)
    cols = bicubic_weights(w, out_w)
    out = np.tensordot(rows, img, axes=(1, 0))
    out = np.tensordot(cols, out, axes=(1, 1))
    return np.moveaxis(out, 0, 1)


def downscale_bicubic(hr: np.ndarray, factor: int = 4) -> np.ndarray:
    """Anti-aliased bicubic downscale by an integer factor.

    Dimensions not divisible by the factor are cropped to the nearest
    multiple, with a warning.
    """
    if factor < 1:
        raise InputError("factor must be >= 1")
    h, w = hr.shape[:2]
    if h % factor or w % factor:
        warnings.warn(
            f"cropping {h}x{w} image to a multiple of {factor} before downscaling",
            stacklevel=2,
        )
        hr = hr[: h - h % factor, : w - w % factor]
        h, w = hr.shape[:2]
    return resize_bicubic(hr, h // factor, w // factor)


def upscale_bicubic(lr: np.ndarray, factor: int = 4) -> np.ndarray:
    h, w = lr.shape[:2]
    return resize_bicubic(lr, h * factor, w * factor)


def apply_dihedral(img: np.ndarray, k: int) -> np.ndarray:
    """Apply the k-th of the 8 dihedral symmetries (k in 0..7).

    k % 4 counts 90-degree rotations; k >= 4 adds a horizontal flip first.
    """
    if not 0 <= k < 8:
        raise InputError(f"dihedral index {k} out of range")
    out = img[:, ::-1] if k >= 4 else img
    return np.rot90(out, k % 4)


def dihedral_params(k: int) -> Tuple[int, bool, bool]:
    """(rotation degrees, hflip, vflip) description of element k."""
    return (90 * (k % 4), k >= 4, False)


@dataclass
class DatasetIndex:
    """Ordered list of decodable images plus the training-split channel mean."""

    entries: List[Tuple[str, int, int]]
    split: str
    channel_mean: Optional[Tuple[float, float, float]] = None

    def __len__(self) -> int:
        return len(self.entries)

    def mean_array(self) -> np.ndarray:
        if self.channel_mean is None:
            raise InputError("index carries no channel mean (test split?)")
        return np.asarray(self.channel_mean, dtype=np.float64)

    def to_json(self) -> str:
        return json.dumps(
            {"split": self.split, "channel_mean": self.channel_mean,
             "entries": self.entries},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DatasetIndex":
        data = json.loads(text)
        mean = data.get("channel_mean")
        return cls(
            entries=[tuple(e) for e in data["entries"]],
            split=data["split"],
            channel_mean=tuple(mean) if mean is not None else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "DatasetIndex":
        return cls.from_json(Path(path).read_text())


def ingest_dataset(roots: Sequence, split: str = "train",
                   compute_mean: Optional[bool] = None) -> DatasetIndex:
    """Index every decodable image under the given roots, lexicographically.

    The per-channel mean is computed over all pixels of the indexed images,
    by default only for the training split. Unreadable files are skipped with
    a warning; an empty result is fatal.
    """
    if compute_mean is None:
        compute_mean = split == "train"
    paths = []
    for root in roots:
        root = Path(root)
        if not root.exists():
            raise InputError(f"dataset root does not exist: {root}")
        if root.is_file():
            paths.append(root)
        else:
            paths.extend(p for p in root.rglob("*")
                         if p.suffix.lower() in IMAGE_SUFFIXES)
    paths = sorted(set(paths), key=lambda p: str(p))

    entries: List[Tuple[str, int, int]] = []
    pixel_sum = np.zeros(3)
    pixel_count = 0
    for path in paths:
        try:
            img = load_image(path)
        except Exception as exc:
            logger.warning("skipping unreadable image %s: %s", path, exc)
            continue
        h, w = img.shape[:2]
        entries.append((str(path), w, h))
        if compute_mean:
            pixel_sum += img.reshape(-1, 3).sum(axis=0)
            pixel_count += h * w
    if not entries:
        raise InputError(f"no decodable images found under {list(map(str, roots))}")
    mean = tuple(pixel_sum / pixel_count) if compute_mean else None
    return DatasetIndex(entries=entries, split=split, channel_mean=mean)


@dataclass
class PatchPair:
    """Aligned LR/HR training patches after augmentation and zero-centering."""

    lr: np.ndarray
    hr: np.ndarray
    augmentation: Tuple[int, bool, bool] = (0, False, False)


def zero_center(img: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return img - mean


def un_center(img: np.ndarray, mean: np.ndarray) -> np.ndarray:
    return img + mean


def sample_patch_pair(index: DatasetIndex, rng: np.random.Generator,
                      hr_patch: int = 96, factor: int = 4,
                      augment: bool = True, center: bool = True) -> PatchPair:
    """Draw one augmented, zero-centered patch pair.

    The HR patch location is uniform over valid positions; each of the 8
    dihedral augmentations is equally likely. The LR patch is synthesized from
    the augmented HR patch, so the pair stays exactly aligned. Images smaller
    than the patch are skipped and another image is drawn.
    """
    if hr_patch % factor:
        raise InputError("hr_patch must be divisible by the scale factor")
    for _ in range(10 * max(1, len(index))):
        path, w, h = index.entries[rng.integers(len(index))]
        if w >= hr_patch and h >= hr_patch:
            break
    else:
        raise InputError(f"no image in the index admits a {hr_patch}px patch")
    img = load_image(path)
    top = int(rng.integers(h - hr_patch + 1))
    left = int(rng.integers(w - hr_patch + 1))
    hr = img[top: top + hr_patch, left: left + hr_patch]
    k = int(rng.integers(8)) if augment else 0
    hr = np.ascontiguousarray(apply_dihedral(hr, k))
    lr = downscale_bicubic(hr, factor)
    if center:
        mean = index.mean_array()
        hr = zero_center(hr, mean)
        lr = zero_center(lr, mean)
    return PatchPair(lr=lr, hr=hr, augmentation=dihedral_params(k))


def sample_batch(index: DatasetIndex, rng: np.random.Generator, batch: int,
                 hr_patch: int = 96, factor: int = 4, augment: bool = True,
                 center: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Stack ``batch`` patch pairs into channel-first (N, C, h, w) arrays."""
    pairs = [sample_patch_pair(index, rng, hr_patch, factor, augment, center)
             for _ in range(batch)]
    lr = np.stack([p.lr.transpose(2, 0, 1) for p in pairs])
    hr = np.stack([p.hr.transpose(2, 0, 1) for p in pairs])
    return lr, hr
