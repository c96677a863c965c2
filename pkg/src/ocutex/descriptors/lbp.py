"""Uniform local binary patterns over the 8-connected square neighborhood.

The raw pattern packs neighbor-vs-center comparisons (neighbor >= center)
clockwise from the top-left corner, most significant bit first.  Patterns
with at most two circular 0/1 transitions are "uniform"; the 58 uniform
patterns map, in ascending raw order, to labels 0..57 and everything else
shares label 58.
"""

from __future__ import annotations

import numpy as np

from ..image import as_gray

__all__ = ["LBP_LABELS", "lbp_code_image", "uniform_label_table"]

LBP_LABELS = 59

# Clockwise from top-left: (row offset, column offset) per bit, MSB first.
_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def _transitions(pattern: int) -> int:
    rotated = ((pattern << 1) | (pattern >> 7)) & 0xFF
    return bin(pattern ^ rotated).count("1")


def uniform_label_table() -> np.ndarray:
    """Map raw 8-bit patterns to the 59 uniform labels."""
    table = np.full(256, LBP_LABELS - 1, dtype=np.uint8)
    uniform = [p for p in range(256) if _transitions(p) <= 2]
    assert len(uniform) == 58
    for label, pattern in enumerate(uniform):
        table[pattern] = label
    return table


_TABLE = uniform_label_table()


def lbp_code_image(img: np.ndarray) -> np.ndarray:
    """Per-pixel uniform labels in [0, 59).  Borders use replicate padding."""
    a = as_gray(img)
    if a.shape[0] < 3 or a.shape[1] < 3:
        raise ValueError(f"image must be at least 3x3, got {a.shape[1]}x{a.shape[0]}")
    padded = np.pad(a, 1, mode="edge")
    h, w = a.shape
    raw = np.zeros((h, w), dtype=np.uint8)
    for bit, (dy, dx) in enumerate(_OFFSETS):
        neighbor = padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        raw |= (neighbor >= a).astype(np.uint8) << (7 - bit)
    return _TABLE[raw]
