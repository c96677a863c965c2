"""Per-pixel texture code images and the descriptor configurations.

Each descriptor turns a gray image into an integer code image plus a
code cardinality; the feature layer histograms those codes per cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .bsif import (
    VALID_DEPTHS,
    VALID_SIZES,
    FilterBank,
    IcaConvergenceError,
    bank_from_bytes,
    bsif_code_image,
    learn_filters,
    load_bank,
    save_bank,
)
from .lbp import LBP_LABELS, lbp_code_image
from .lpq import LPQ_CARDINALITY, lpq_code_image

__all__ = [
    "FilterBank",
    "IcaConvergenceError",
    "learn_filters",
    "bsif_code_image",
    "lbp_code_image",
    "lpq_code_image",
    "save_bank",
    "load_bank",
    "default_bank",
    "Bsif",
    "Lbp",
    "Lpq",
    "descriptor_from_name",
    "LBP_LABELS",
    "LPQ_CARDINALITY",
    "VALID_SIZES",
    "VALID_DEPTHS",
]


@dataclass(frozen=True)
class Bsif:
    bank: FilterBank

    @property
    def tag(self) -> str:
        return self.bank.tag

    @property
    def cardinality(self) -> int:
        return self.bank.cardinality

    def code_image(self, img: np.ndarray) -> np.ndarray:
        return bsif_code_image(img, self.bank)


@dataclass(frozen=True)
class Lbp:
    tag: str = field(default="lbp-u8r1", init=False)
    cardinality: int = field(default=LBP_LABELS, init=False)

    def code_image(self, img: np.ndarray) -> np.ndarray:
        return lbp_code_image(img)


@dataclass(frozen=True)
class Lpq:
    window: int = 7

    @property
    def tag(self) -> str:
        return f"lpq-w{self.window}"

    @property
    def cardinality(self) -> int:
        return LPQ_CARDINALITY

    def code_image(self, img: np.ndarray) -> np.ndarray:
        return lpq_code_image(img, self.window)


Descriptor = Bsif | Lbp | Lpq


def default_bank() -> FilterBank:
    """The filter bank shipped with the package (k=9, n=8, seeded build)."""
    data = resources.files("ocutex").joinpath("data", "bsif_k9_n8.bank").read_bytes()
    return bank_from_bytes(data)


def descriptor_from_name(
    name: str, *, bank: FilterBank | None = None, window: int = 7
) -> Descriptor:
    """Build a descriptor config from a CLI-style name: bsif, lbp, or lpq."""
    if name == "bsif":
        return Bsif(bank if bank is not None else default_bank())
    if name == "lbp":
        return Lbp()
    if name == "lpq":
        return Lpq(window)
    raise ValueError(f"unknown descriptor {name!r} (expected bsif, lbp, or lpq)")
