"""Geometric normalization of eye images into a canonical ocular frame.

The iris center is mapped to the canonical frame center and the iris
radius to a canonical pixel radius by one uniform scale; the output is
bicubically resampled from the source.  Region selectors then keep the
full frame, the iris square, or the frame with the iris disc zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .image import as_gray, quantize_u8, sample_grid

__all__ = [
    "OcularGeometry",
    "AlignParams",
    "Region",
    "InsufficientBorder",
    "align_ocular",
    "apply_region",
]


@dataclass(frozen=True)
class OcularGeometry:
    """Iris circle in source-image pixel coordinates (x = column, y = row)."""

    center_x: float
    center_y: float
    radius: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError(f"iris radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class AlignParams:
    out_w: int = 400
    out_h: int = 340
    canonical_radius: float = 60.0

    def __post_init__(self):
        if self.out_w <= 0 or self.out_h <= 0:
            raise ValueError(f"bad output size {self.out_w}x{self.out_h}")
        # The canonical iris disc must fit inside the frame.
        if not (0 < self.canonical_radius < min(self.out_w, self.out_h) / 2):
            raise ValueError(
                f"canonical radius {self.canonical_radius} does not fit in "
                f"{self.out_w}x{self.out_h}"
            )

    @property
    def canonical_center(self) -> tuple[float, float]:
        return (self.out_w / 2, self.out_h / 2)


class Region(Enum):
    EXTENDED_OCULAR = "extended_ocular"
    IRIS_ONLY = "iris_only"
    IRIS_EXCLUDED = "iris_excluded"


class InsufficientBorder(ValueError):
    """The scaled source cannot cover the canonical frame without fabricating pixels."""


def _source_coords(shape: tuple[int, int], geo: OcularGeometry, p: AlignParams):
    scale = p.canonical_radius / geo.radius
    ccx, ccy = p.canonical_center
    xs = geo.center_x + (np.arange(p.out_w) - ccx) / scale
    ys = geo.center_y + (np.arange(p.out_h) - ccy) / scale
    return xs, ys


def align_ocular(
    img: np.ndarray, geo: OcularGeometry, p: AlignParams = AlignParams()
) -> np.ndarray:
    """Resample ``img`` so the iris lands at the canonical center and radius.

    Raises InsufficientBorder when any output pixel would have to be read
    from outside the source extent; no padding is ever fabricated.
    """
    a = as_gray(img)
    h, w = a.shape
    xs, ys = _source_coords((h, w), geo, p)
    eps = 1e-9
    if xs[0] < -eps or ys[0] < -eps or xs[-1] > w - 1 + eps or ys[-1] > h - 1 + eps:
        raise InsufficientBorder(
            f"canonical frame needs source x in [{xs[0]:.1f}, {xs[-1]:.1f}], "
            f"y in [{ys[0]:.1f}, {ys[-1]:.1f}], but image is {w}x{h}"
        )
    return quantize_u8(sample_grid(a, xs, ys))


def _disc_mask(shape: tuple[int, int], cx: float, cy: float, r: float) -> np.ndarray:
    """Boolean mask of pixels strictly inside the circle (index coordinates)."""
    yy, xx = np.ogrid[: shape[0], : shape[1]]
    return (xx - cx) ** 2 + (yy - cy) ** 2 < r * r


def apply_region(canon: np.ndarray, sel: Region, p: AlignParams = AlignParams()) -> np.ndarray:
    """Select a region of an aligned frame.  Masked pixels are set to 0.

    IRIS_ONLY returns the square crop of side 2*canonical_radius around the
    canonical center with everything outside the inscribed iris disc zeroed;
    IRIS_EXCLUDED returns the full frame with the iris disc zeroed.  The two
    use the same strict-interior disc predicate, so their kept pixel sets
    partition the frame exactly.
    """
    a = as_gray(canon)
    if a.shape != (p.out_h, p.out_w):
        raise ValueError(
            f"expected a canonical {p.out_w}x{p.out_h} frame, got "
            f"{a.shape[1]}x{a.shape[0]}"
        )
    if sel is Region.EXTENDED_OCULAR:
        return a.copy()

    ccx, ccy = p.canonical_center
    r = p.canonical_radius
    if sel is Region.IRIS_ONLY:
        side = int(round(2 * r))
        x0 = int(round(ccx - r))
        y0 = int(round(ccy - r))
        crop = a[y0 : y0 + side, x0 : x0 + side].copy()
        keep = _disc_mask(crop.shape, ccx - x0, ccy - y0, r)
        crop[~keep] = 0
        return crop
    if sel is Region.IRIS_EXCLUDED:
        out = a.copy()
        out[_disc_mask(a.shape, ccx, ccy, r)] = 0
        return out
    raise ValueError(f"unknown region selector {sel!r}")
