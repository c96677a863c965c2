"""Regenerate the filter bank shipped with the package.

The bank is learned from deterministically synthesized textures with
natural-image-like statistics: 1/f background noise plus sparse soft
discs and bars, which gives the super-Gaussian patch structure the ICA
stage needs.  Run from the repository root:

    python scripts/build_default_bank.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ocutex.descriptors import learn_filters, save_bank  # noqa: E402
from ocutex.image import quantize_u8  # noqa: E402

SEED = 7
SIZE = 256
COUNT = 12
K = 9
N = 8


def pink_noise(rng: np.random.Generator, size: int) -> np.ndarray:
    spectrum = np.fft.fft2(rng.standard_normal((size, size)))
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    radius = np.hypot(fx, fy)
    radius[0, 0] = 1.0
    shaped = np.fft.ifft2(spectrum / radius).real
    shaped[0, 0] = shaped.mean()
    return (shaped - shaped.mean()) / shaped.std()


def texture_image(rng: np.random.Generator) -> np.ndarray:
    canvas = 20.0 * pink_noise(rng, SIZE)
    yy, xx = np.mgrid[:SIZE, :SIZE]
    for _ in range(60):
        cx, cy = rng.uniform(0, SIZE, 2)
        level = rng.uniform(-60, 60)
        if rng.random() < 0.5:
            r = rng.uniform(3, 25)
            soft = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * (r / 2) ** 2))
        else:
            theta = rng.uniform(0, np.pi)
            width = rng.uniform(1.5, 6)
            length = rng.uniform(10, 60)
            u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
            v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
            soft = np.exp(-(u**2) / (2 * width**2)) * (np.abs(v) < length / 2)
        canvas += level * soft
    return quantize_u8(canvas + 128.0)


def main() -> None:
    rng = np.random.default_rng(SEED)
    images = [texture_image(rng) for _ in range(COUNT)]
    bank = learn_filters(images, k=K, n=N, seed=SEED)
    out = os.path.join(os.path.dirname(__file__), "..", "src", "ocutex", "data", "bsif_k9_n8.bank")
    save_bank(os.path.normpath(out), bank)
    print(f"wrote {os.path.normpath(out)} ({bank.tag})")


if __name__ == "__main__":
    main()
