"""Cell-tessellated code histograms: the feature vectors fed to the SVM.

A code image is cut into non-overlapping square cells, row-major; each
cell contributes one L1-normalized histogram over the descriptor's code
range, and the concatenation is the feature vector.  Zeroed (masked)
pixels count like any other code value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .align import AlignParams, OcularGeometry, Region, align_ocular, apply_region
from .descriptors import Descriptor

__all__ = [
    "CELL_SIZE",
    "FeatureVector",
    "tessellate_histograms",
    "fingerprint",
    "extract_features",
    "save_features",
    "load_features",
]

CELL_SIZE = 20

_FEATURE_MAGIC = b"OFVC"
_FEATURE_VERSION = 1


@dataclass(frozen=True)
class FeatureVector:
    descriptor_id: str
    region: str
    values: np.ndarray  # float64, per-cell histograms concatenated

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def fingerprint(descriptor: Descriptor, sel: Region, cell: int, dim: int) -> str:
    return f"{descriptor.tag}|{sel.value}|cell{cell}|dim{dim}"


def tessellate_histograms(
    codes: np.ndarray,
    cardinality: int,
    cell: int = CELL_SIZE,
    *,
    descriptor_id: str = "",
    region: str = "",
) -> FeatureVector:
    """Concatenate per-cell L1-normalized code histograms, cells row-major."""
    c = np.asarray(codes)
    if c.ndim != 2:
        raise ValueError(f"expected a 2-D code image, got shape {c.shape}")
    h, w = c.shape
    if cell <= 0 or h % cell or w % cell:
        raise ValueError(f"image {w}x{h} is not a multiple of cell size {cell}")
    if c.min() < 0 or c.max() >= cardinality:
        raise ValueError(
            f"codes outside [0, {cardinality}): min {c.min()}, max {c.max()}"
        )
    rows, cols = h // cell, w // cell
    cells = c.reshape(rows, cell, cols, cell).transpose(0, 2, 1, 3)
    cell_index = np.repeat(np.arange(rows * cols), cell * cell)
    flat = cells.reshape(rows * cols, cell * cell).ravel()
    combined = np.bincount(
        cell_index * cardinality + flat.astype(np.int64), minlength=rows * cols * cardinality
    )
    hist = combined.reshape(rows * cols, cardinality).astype(np.float64)
    hist /= cell * cell
    return FeatureVector(descriptor_id, region, hist.ravel())


def extract_features(
    img: np.ndarray,
    geo: OcularGeometry,
    sel: Region,
    descriptor: Descriptor,
    params: AlignParams = AlignParams(),
    cell: int = CELL_SIZE,
) -> FeatureVector:
    """Align, select the region, code, and histogram one image."""
    canon = align_ocular(img, geo, params)
    masked = apply_region(canon, sel, params)
    codes = descriptor.code_image(masked)
    fv = tessellate_histograms(codes, descriptor.cardinality, cell)
    fid = fingerprint(descriptor, sel, cell, fv.dim)
    return FeatureVector(fid, sel.value, fv.values)


def save_features(path, fv: FeatureVector) -> None:
    """Header (descriptor id, region, dim) then little-endian float32 values."""
    did = fv.descriptor_id.encode("utf-8")
    reg = fv.region.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_FEATURE_MAGIC)
        fh.write(struct.pack("<HHHI", _FEATURE_VERSION, len(did), len(reg), fv.dim))
        fh.write(did)
        fh.write(reg)
        fh.write(fv.values.astype("<f4").tobytes())


def load_features(path) -> FeatureVector:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _FEATURE_MAGIC:
        raise ValueError(f"not a feature file (magic {data[:4]!r})")
    version, dlen, rlen, dim = struct.unpack_from("<HHHI", data, 4)
    if version != _FEATURE_VERSION:
        raise ValueError(f"unsupported feature file version {version}")
    pos = 4 + struct.calcsize("<HHHI")
    did = data[pos : pos + dlen].decode("utf-8")
    reg = data[pos + dlen : pos + dlen + rlen].decode("utf-8")
    body = data[pos + dlen + rlen :]
    if len(body) != dim * 4:
        raise ValueError(f"feature payload is {len(body)} bytes, expected {dim * 4}")
    values = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return FeatureVector(did, reg, values)
