"""Grayscale image primitives: PGM I/O, bicubic resampling, Gaussian blur.

An image is a 2-D ``numpy.ndarray`` of dtype uint8 with shape (height,
width), row-major.  All geometry in this package uses (x, y) = (column,
row) order for points and keeps arrays in (row, column) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

__all__ = [
    "PgmFormatError",
    "BlurConfig",
    "as_gray",
    "quantize_u8",
    "load_pgm",
    "write_pgm",
    "resize_bicubic",
    "gaussian_blur",
]

MAX_GRAY = 255


class PgmFormatError(ValueError):
    """Malformed PGM input.  ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class BlurConfig:
    """Gaussian blur parameters.  Kernel radius follows ceil(3*sigma)."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError(f"blur sigma must be positive, got {self.sigma}")

    @property
    def radius(self) -> int:
        return math.ceil(3.0 * self.sigma)


def as_gray(arr: np.ndarray) -> np.ndarray:
    """Validate and return ``arr`` as a (h, w) uint8 image."""
    a = np.asarray(arr)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D gray image, got shape {a.shape}")
    if a.dtype != np.uint8:
        raise ValueError(f"expected dtype uint8, got {a.dtype}")
    if a.size == 0:
        raise ValueError("image has zero pixels")
    return a


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero, then clamp to [0, 255] uint8."""
    v = np.asarray(values, dtype=np.float64)
    rounded = np.where(v >= 0, np.floor(v + 0.5), np.ceil(v - 0.5))
    return np.clip(rounded, 0, MAX_GRAY).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM (portable graymap), P5 raw and P2 ASCII, maxval <= 255.

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, token_start, next_pos), skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    if pos >= n:
        raise PgmFormatError("unexpected end of header", n)
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def _int_token(data: bytes, pos: int, what: str) -> tuple[int, int, int]:
    token, start, pos = _next_token(data, pos)
    if not token.isdigit():
        raise PgmFormatError(f"expected {what}, got {token!r}", start)
    return int(token), start, pos


def load_pgm(path) -> np.ndarray:
    """Read a P5 or P2 PGM file with maxval <= 255.

    Pixel values are returned exactly as stored; no rescaling happens for
    maxval below 255.  Errors name the byte offset of the offending input.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    magic, start, pos = _next_token(data, 0)
    if magic not in (b"P5", b"P2"):
        raise PgmFormatError(f"not a PGM file (magic {magic!r})", start)
    width, wstart, pos = _int_token(data, pos, "width")
    height, hstart, pos = _int_token(data, pos, "height")
    if width <= 0 or height <= 0:
        raise PgmFormatError(f"bad dimensions {width}x{height}", wstart)
    maxval, mstart, pos = _int_token(data, pos, "maxval")
    if not (0 < maxval <= MAX_GRAY):
        raise PgmFormatError(f"unsupported maxval {maxval}", mstart)

    count = width * height
    if magic == b"P5":
        # Exactly one whitespace byte separates the header from the payload.
        if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
            raise PgmFormatError("missing whitespace before raster", pos)
        pos += 1
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise PgmFormatError(
                f"truncated raster: expected {count} bytes, got {len(payload)}",
                len(data),
            )
        img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
        if maxval < MAX_GRAY and int(img.max()) > maxval:
            bad = pos + int(np.argmax(img.ravel() > maxval))
            raise PgmFormatError(f"sample exceeds maxval {maxval}", bad)
        return img.copy()

    values = np.empty(count, dtype=np.uint8)
    for i in range(count):
        value, vstart, pos = _int_token(data, pos, "sample")
        if value > maxval:
            raise PgmFormatError(f"sample {value} exceeds maxval {maxval}", vstart)
        values[i] = value
    return values.reshape(height, width)


def write_pgm(path, img: np.ndarray) -> None:
    """Write a canonical binary P5 file: ``P5\\n<w> <h>\\n255\\n`` + raster."""
    a = as_gray(img)
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n{MAX_GRAY}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(a.tobytes())


# ---------------------------------------------------------------------------
# Bicubic resampling (Catmull-Rom kernel, a = -0.5), replicate border.


def _cubic_weights(t: np.ndarray) -> np.ndarray:
    """Weights for taps at offsets [-1, 0, 1, 2], t in [0, 1). Shape (m, 4)."""
    a = -0.5
    t = np.asarray(t, dtype=np.float64)
    # Distances from the sample point to each tap.
    d = np.stack([t + 1.0, t, 1.0 - t, 2.0 - t], axis=-1)
    w = np.empty_like(d)
    inner = d[..., 1:3]
    w[..., 1:3] = (a + 2.0) * inner**3 - (a + 3.0) * inner**2 + 1.0
    outer = d[..., (0, 3)]
    w[..., (0, 3)] = a * outer**3 - 5.0 * a * outer**2 + 8.0 * a * outer - 4.0 * a
    return w


def _sample_axis(arr: np.ndarray, coords: np.ndarray, axis: int) -> np.ndarray:
    """Cubic interpolation of ``arr`` at fractional ``coords`` along ``axis``."""
    n = arr.shape[axis]
    base = np.floor(coords).astype(np.int64)
    w = _cubic_weights(coords - base)
    taps = base[:, None] + np.arange(-1, 3)
    np.clip(taps, 0, n - 1, out=taps)
    moved = np.moveaxis(arr, axis, -1)
    gathered = moved[..., taps]  # (..., m, 4)
    out = np.einsum("...mk,mk->...m", gathered, w)
    return np.moveaxis(out, -1, axis)


def sample_grid(arr: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Evaluate ``arr`` bicubically on the separable grid ys x xs (float64 out)."""
    a = np.asarray(arr, dtype=np.float64)
    return _sample_axis(_sample_axis(a, np.asarray(xs, np.float64), 1), np.asarray(ys, np.float64), 0)


def resize_bicubic(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Resize with bicubic convolution.  Same-size calls are bit-exact copies."""
    a = as_gray(img)
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"bad output size {out_w}x{out_h}")
    h, w = a.shape
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    return quantize_u8(sample_grid(a, xs, ys))


# ---------------------------------------------------------------------------
# Separable Gaussian blur, replicate border.


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian with radius ceil(3*sigma), L1-normalized."""
    radius = BlurConfig(sigma).radius
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def blur_f64(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Blur a float64 array; exposed separately so tests can check pre-quantized values."""
    kernel = gaussian_kernel(sigma)
    a = np.asarray(arr, dtype=np.float64)
    out = correlate1d(a, kernel, axis=0, mode="nearest")
    return correlate1d(out, kernel, axis=1, mode="nearest")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur of a uint8 image.  sigma must be positive."""
    return quantize_u8(blur_f64(as_gray(img), sigma))
