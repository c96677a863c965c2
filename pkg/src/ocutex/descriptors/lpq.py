"""Local phase quantization: signs of short-time Fourier coefficients.

At every pixel a square window (odd side m) is transformed at the four
lowest nonzero frequencies u1=(a,0), u2=(0,a), u3=(a,a), u4=(a,-a) with
a = 1/m, offsets measured from the window center.  The 8-bit code packs
[Re u1, Im u1, Re u2, Im u2, Re u3, Im u3, Re u4, Im u4], MSB first,
with bit 1 where the coefficient is >= 0.  Borders replicate.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from ..image import as_gray

__all__ = ["LPQ_CARDINALITY", "lpq_code_image"]

LPQ_CARDINALITY = 256

# Coefficients smaller than this are treated as +0 so the >= 0 convention
# is deterministic on flat windows, where the exact sums are zero.
_ZERO_SNAP = 1e-9


def _correlate_complex(arr, kernel, axis):
    real = correlate1d(arr.real, kernel.real, axis=axis, mode="nearest")
    real -= correlate1d(arr.imag, kernel.imag, axis=axis, mode="nearest")
    imag = correlate1d(arr.real, kernel.imag, axis=axis, mode="nearest")
    imag += correlate1d(arr.imag, kernel.real, axis=axis, mode="nearest")
    return real + 1j * imag


def lpq_code_image(img: np.ndarray, window: int = 7) -> np.ndarray:
    """Per-pixel codes in [0, 256).  ``window`` must be odd and >= 3."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    a = as_gray(img).astype(np.float64)
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(
            f"image {a.shape[1]}x{a.shape[0]} is smaller than the {window}x{window} window"
        )
    r = window // 2
    offsets = np.arange(-r, r + 1, dtype=np.float64)
    wave = np.exp(-2j * np.pi * offsets / window)
    flat = np.ones(window, dtype=np.float64)

    along_x = _correlate_complex(a.astype(np.complex128), wave, axis=1)
    f1 = _correlate_complex(along_x, flat.astype(np.complex128), axis=0)
    f3 = _correlate_complex(along_x, wave, axis=0)
    f4 = _correlate_complex(along_x, np.conj(wave), axis=0)
    sum_x = correlate1d(a, flat, axis=1, mode="nearest")
    f2 = _correlate_complex(sum_x.astype(np.complex128), wave, axis=0)

    parts = np.stack(
        [f1.real, f1.imag, f2.real, f2.imag, f3.real, f3.imag, f4.real, f4.imag]
    )
    parts[np.abs(parts) < _ZERO_SNAP] = 0.0
    codes = np.zeros(a.shape, dtype=np.uint8)
    for bit in range(8):
        codes |= (parts[bit] >= 0).astype(np.uint8) << (7 - bit)
    return codes
