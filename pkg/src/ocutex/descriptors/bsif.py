"""Binary codes from banks of statistically learned linear filters.

A bank holds n zero-mean k x k filters.  Each pixel's code packs, most
significant bit first, one bit per filter: 1 where the filter response
on the mean-removed image is strictly positive.  Banks are learned from
random natural-image patches by PCA whitening followed by fixed-point
ICA with a tanh contrast function and symmetric orthogonalization.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..image import as_gray

__all__ = [
    "FilterBank",
    "IcaConvergenceError",
    "learn_filters",
    "bsif_code_image",
    "save_bank",
    "load_bank",
    "VALID_SIZES",
    "VALID_DEPTHS",
]

VALID_SIZES = (3, 5, 7, 9, 11, 13, 15, 17)
VALID_DEPTHS = range(5, 13)

_BANK_MAGIC = b"BSIF"
_BANK_VERSION = 1


class IcaConvergenceError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"ICA did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.iterations = iterations


@dataclass(frozen=True)
class FilterBank:
    """n filters of size k x k, stored as an (n, k, k) float64 array."""

    filters: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.filters, dtype=np.float64)
        if f.ndim != 3 or f.shape[1] != f.shape[2]:
            raise ValueError(f"filters must be (n, k, k), got {f.shape}")
        n, k, _ = f.shape
        if k not in VALID_SIZES:
            raise ValueError(f"filter size {k} not in {VALID_SIZES}")
        if n not in VALID_DEPTHS:
            raise ValueError(f"bit depth {n} not in 5..12")
        means = f.reshape(n, -1).mean(axis=1)
        if np.abs(means).max() > 1e-6:
            raise ValueError(f"filters must be zero-mean (max |mean| {np.abs(means).max():.2e})")
        flat = f.reshape(n, -1)
        gram = flat @ flat.T
        eig = np.linalg.eigvalsh(gram)
        if eig[0] <= 1e-6 * max(eig[-1], 1.0):
            raise ValueError("filters are not linearly independent")
        object.__setattr__(self, "filters", f)

    @property
    def k(self) -> int:
        return self.filters.shape[1]

    @property
    def n(self) -> int:
        return self.filters.shape[0]

    @property
    def cardinality(self) -> int:
        return 1 << self.n

    @property
    def tag(self) -> str:
        """Identifies size, depth, and exact coefficients (for model compatibility)."""
        crc = zlib.crc32(self.filters.tobytes()) & 0xFFFFFFFF
        return f"bsif-k{self.k}-n{self.n}-{crc:08x}"


def save_bank(path, bank: FilterBank) -> None:
    """Write magic, version, k, n, then n*k*k little-endian float64 coefficients."""
    with open(path, "wb") as fh:
        fh.write(_BANK_MAGIC)
        fh.write(struct.pack("<HHH", _BANK_VERSION, bank.k, bank.n))
        fh.write(bank.filters.astype("<f8").tobytes())


def load_bank(path) -> FilterBank:
    with open(path, "rb") as fh:
        return bank_from_bytes(fh.read())


def bank_from_bytes(data: bytes) -> FilterBank:
    if data[:4] != _BANK_MAGIC:
        raise ValueError(f"not a filter bank file (magic {data[:4]!r})")
    version, k, n = struct.unpack_from("<HHH", data, 4)
    if version != _BANK_VERSION:
        raise ValueError(f"unsupported filter bank version {version}")
    body = data[10:]
    expected = n * k * k * 8
    if len(body) != expected:
        raise ValueError(f"filter bank payload is {len(body)} bytes, expected {expected}")
    filters = np.frombuffer(body, dtype="<f8").reshape(n, k, k)
    return FilterBank(filters)


# ---------------------------------------------------------------------------
# Learning.

PATCH_COUNT = 50_000


def _sample_patches(images, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` distinct k x k patch positions pooled across images."""
    arrays = [as_gray(im) for im in images]
    spans = []
    for a in arrays:
        h, w = a.shape
        if h >= k and w >= k:
            spans.append((a, h - k + 1, w - k + 1))
    total = sum(r * c for _, r, c in spans)
    if total < count:
        raise ValueError(
            f"images supply only {total} distinct {k}x{k} patch positions, need {count}"
        )
    picks = np.sort(rng.choice(total, size=count, replace=False))
    patches = np.empty((count, k * k), dtype=np.float64)
    base = 0
    i = 0
    for a, rows, cols in spans:
        block = rows * cols
        while i < count and picks[i] < base + block:
            local = int(picks[i] - base)
            r, c = divmod(local, cols)
            patches[i] = a[r : r + k, c : c + k].ravel()
            i += 1
        base += block
    # Per-patch DC removal; filters inherit zero mean from this subspace.
    patches -= patches.mean(axis=1, keepdims=True)
    return patches


def _symmetric_orthogonalize(w: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(w @ w.T)
    if values[0] <= 0:
        raise np.linalg.LinAlgError("degenerate unmixing matrix")
    inv_sqrt = (vectors * (1.0 / np.sqrt(values))) @ vectors.T
    return inv_sqrt @ w


def learn_filters(
    images,
    k: int,
    n: int,
    seed: int,
    *,
    patch_count: int = PATCH_COUNT,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> FilterBank:
    """Learn an n-filter bank of k x k filters from the given gray images.

    Pipeline: sample ``patch_count`` random patches, remove each patch's
    mean, whiten with PCA keeping the top n components, then run
    symmetric fixed-point ICA (tanh contrast) until the largest change in
    any filter direction falls below ``tol``.  Deterministic for a fixed
    seed.  Raises IcaConvergenceError after ``max_iter`` sweeps.
    """
    if k not in VALID_SIZES:
        raise ValueError(f"filter size {k} not in {VALID_SIZES}")
    if n not in VALID_DEPTHS:
        raise ValueError(f"bit depth {n} not in 5..12")
    rng = np.random.default_rng(seed)
    patches = _sample_patches(images, k, patch_count, rng)
    m = patches.shape[0]

    cov = patches.T @ patches / (m - 1)
    values, vectors = np.linalg.eigh(cov)
    top = np.argsort(values)[::-1][:n]
    lead = values[top]
    if lead[-1] <= 1e-12 * lead[0]:
        raise ValueError("patch set too degenerate to keep the requested components")
    whitener = (vectors[:, top] / np.sqrt(lead)).T  # (n, k*k)
    z = whitener @ patches.T  # (n, m), identity covariance

    w = _symmetric_orthogonalize(rng.standard_normal((n, n)))
    residual = np.inf
    for _ in range(max_iter):
        g = np.tanh(w @ z)
        w_new = (g @ z.T) / m - ((1.0 - g * g).mean(axis=1))[:, None] * w
        w_new = _symmetric_orthogonalize(w_new)
        residual = float(np.abs(1.0 - np.abs(np.sum(w_new * w, axis=1))).max())
        w = w_new
        if residual < tol:
            break
    else:
        raise IcaConvergenceError(max_iter, residual)

    flat = w @ whitener
    # Canonical sign: largest-magnitude coefficient positive.
    peaks = flat[np.arange(n), np.abs(flat).argmax(axis=1)]
    flat = flat * np.where(peaks < 0, -1.0, 1.0)[:, None]
    return FilterBank(flat.reshape(n, k, k))


# ---------------------------------------------------------------------------
# Coding.


def mean_removed_integer(img: np.ndarray) -> np.ndarray:
    """Return N*img - sum(img) as float64 (N = pixel count).

    This equals N * (img - mean) with every entry an exact integer, so
    thresholding at zero is exactly invariant to adding a constant gray
    level to the whole image.
    """
    a = as_gray(img).astype(np.float64)
    return a * a.size - a.sum()


def bsif_code_image(img: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Per-pixel codes in [0, 2**n).  Bit i (MSB first) is 1 where filter i
    responds strictly positively on the mean-removed, replicate-padded image.
    """
    a = as_gray(img)
    k, n = bank.k, bank.n
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("empty image")
    centered = mean_removed_integer(a)
    r = k // 2
    padded = np.pad(centered, r, mode="edge")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    h, w = a.shape
    taps = bank.filters.reshape(n, -1).T  # (k*k, n)
    weights = (1 << np.arange(n - 1, -1, -1)).astype(np.uint16)
    codes = np.zeros((h, w), dtype=np.uint16)
    # Row-chunked GEMM keeps the window matrix small.
    chunk = max(1, (1 << 22) // (w * k * k))
    for y0 in range(0, h, chunk):
        y1 = min(h, y0 + chunk)
        block = windows[y0:y1].reshape(-1, k * k)
        responses = block @ taps  # (pixels, n)
        bits = (responses > 0).astype(np.uint16)
        codes[y0:y1] = (bits @ weights).reshape(y1 - y0, w)
    return codes
