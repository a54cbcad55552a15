import numpy as np
import pytest

from srfeat.data import save_image


def smooth_natural_image(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Synthetic photograph-like image: low-pass filtered noise plus gradients.

    Gives the smooth-plus-texture statistics the alignment and VIF properties
    rely on, without shipping binary fixtures.
    """
    yy, xx = np.mgrid[0:h, 0:w]
    base = 0.5 + 0.25 * np.sin(2 * np.pi * xx / w * 2) * np.cos(2 * np.pi * yy / h * 3)
    noise = rng.standard_normal((h + 16, w + 16, 3))
    kernel = np.outer(np.hanning(17), np.hanning(17))
    kernel /= kernel.sum()
    from scipy.signal import fftconvolve
    smooth = fftconvolve(noise, kernel[..., None], mode="valid")[:h, :w]
    img = base[..., None] + 1.5 * smooth
    return np.clip(img, 0.0, 1.0)


@pytest.fixture(scope="session")
def natural_images():
    rng = np.random.default_rng(2024)
    return [smooth_natural_image(rng, 128, 128) for _ in range(5)]


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, natural_images):
    """Four-image training corpus on disk."""
    root = tmp_path_factory.mktemp("corpus")
    for i, img in enumerate(natural_images[:4]):
        save_image(root / f"img_{i:02d}.png", img)
    return root
