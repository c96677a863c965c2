"""Two-class linear SVM trained by dual coordinate descent.

Solves the L2-regularized L1-hinge problem with the bias folded in as a
constant feature (so the dual stays a box-constrained problem with no
equality constraint).  Per-epoch coordinate order is a seeded shuffle;
training is deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureVector

__all__ = ["SvmConfig", "SvmModel", "train_svm", "decision_value", "predict", "save_model", "load_model"]

_MODEL_MAGIC = b"OSVM"
_MODEL_VERSION = 1

# Largest n*n Gram matrix the trainer will materialize (128 MB of float64).
_GRAM_LIMIT = 16_000_000


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tol: float = 1e-4
    max_iter: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be positive, got {self.C}")
        if self.tol <= 0 or self.max_iter <= 0:
            raise ValueError("tol and max_iter must be positive")


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray  # float64, one per feature dimension
    bias: float
    label_map: dict[int, str]  # {-1: name, +1: name}
    fingerprint: str
    config: SvmConfig
    duality_gap: float
    epochs: int
    # Non-increasing record of the (negated dual) objective, one per epoch.
    objective_path: tuple[float, ...] = field(repr=False, default=())

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        m = np.asarray(x, dtype=np.float64)
        if m.ndim == 1:
            m = m[None, :]
        return m
    return np.stack([np.asarray(v.values, dtype=np.float64) for v in x])


def train_svm(
    x,
    labels,
    cfg: SvmConfig = SvmConfig(),
    *,
    fingerprint: str = "",
) -> SvmModel:
    """Train on rows of ``x`` (arrays or FeatureVectors) with string labels.

    The two distinct label names map to -1/+1 in sorted order.  Stops when
    the duality gap falls below tol * max(1, |primal|) or after max_iter
    epochs; the reached gap is stored on the model either way.
    """
    if not isinstance(x, np.ndarray) and len(x) and isinstance(x[0], FeatureVector):
        ids = {v.descriptor_id for v in x}
        if len(ids) > 1:
            raise ValueError(f"mixed feature fingerprints in training set: {sorted(ids)}")
        if not fingerprint:
            fingerprint = x[0].descriptor_id
    m = _as_matrix(x)
    names = sorted(set(labels))
    if len(names) != 2:
        raise ValueError(f"need exactly two classes, got {names}")
    y = np.where(np.asarray(labels) == names[0], -1.0, 1.0)
    n, d = m.shape
    if n != len(labels):
        raise ValueError(f"{n} rows but {len(labels)} labels")

    rng = np.random.default_rng(cfg.seed)
    c = cfg.C
    alpha = np.zeros(n)
    gap = np.inf
    objective_path: list[float] = []
    epochs = 0
    # Updates touch only augmented inner products (x_i, 1)·(x_j, 1), so when
    # the Gram matrix fits in memory each update costs O(n) instead of O(d).
    use_gram = n * n <= _GRAM_LIMIT and d > n
    if use_gram:
        gram = m @ m.T + 1.0
        qs = gram.diagonal().tolist()
        ys = y.tolist()
        avals = alpha.tolist()
        s = np.zeros(n)  # s[i] = w·x_i + b for the current alpha
        for epoch in range(cfg.max_iter):
            epochs = epoch + 1
            for i in rng.permutation(n).tolist():
                yi = ys[i]
                a_old = avals[i]
                a_new = a_old - (yi * s[i] - 1.0) / qs[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > c:
                    a_new = c
                if a_new != a_old:
                    avals[i] = a_new
                    s += ((a_new - a_old) * yi) * gram[i]
            alpha = np.asarray(avals)
            reg = 0.5 * float((alpha * y) @ s)
            primal = reg + c * np.maximum(0.0, 1.0 - y * s).sum()
            dual = alpha.sum() - reg
            objective_path.append(-dual)
            gap = primal - dual
            if gap <= cfg.tol * max(1.0, abs(primal)):
                break
        coeff = alpha * y
        w = m.T @ coeff
        b = coeff.sum()
    else:
        w = np.zeros(d)
        b = 0.0
        # Diagonal of the Gram matrix in the augmented (x, 1) representation.
        q = np.einsum("ij,ij->i", m, m) + 1.0
        for epoch in range(cfg.max_iter):
            epochs = epoch + 1
            for i in rng.permutation(n):
                g = y[i] * (m[i] @ w + b) - 1.0
                a_new = min(max(alpha[i] - g / q[i], 0.0), c)
                delta = a_new - alpha[i]
                if delta != 0.0:
                    alpha[i] = a_new
                    step = delta * y[i]
                    w += step * m[i]
                    b += step
            margins = y * (m @ w + b)
            reg = 0.5 * (w @ w + b * b)
            primal = reg + c * np.maximum(0.0, 1.0 - margins).sum()
            dual = alpha.sum() - reg
            objective_path.append(-dual)
            gap = primal - dual
            if gap <= cfg.tol * max(1.0, abs(primal)):
                break

    label_map = {-1: names[0], 1: names[1]}
    return SvmModel(
        weights=np.asarray(w, dtype=np.float64),
        bias=float(b),
        label_map=label_map,
        fingerprint=fingerprint,
        config=cfg,
        duality_gap=float(gap),
        epochs=epochs,
        objective_path=tuple(objective_path),
    )


def decision_value(model: SvmModel, x) -> float:
    v = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if isinstance(x, FeatureVector) and model.fingerprint and x.descriptor_id != model.fingerprint:
        raise ValueError(
            f"feature fingerprint {x.descriptor_id!r} does not match the "
            f"model's {model.fingerprint!r}"
        )
    if v.shape[0] != model.dim:
        raise ValueError(f"feature dim {v.shape[0]} != model dim {model.dim}")
    return float(v @ model.weights + model.bias)


def predict(model: SvmModel, x) -> str:
    """Class name by the sign of the decision value; exact zero goes to +1."""
    return model.label_map[1 if decision_value(model, x) >= 0 else -1]


def save_model(path, model: SvmModel) -> None:
    """Magic, version, JSON provenance header, float64 weights+bias, crc32."""
    header = {
        "fingerprint": model.fingerprint,
        "labels": [model.label_map[-1], model.label_map[1]],
        "dim": model.dim,
        "C": model.config.C,
        "tol": model.config.tol,
        "max_iter": model.config.max_iter,
        "seed": model.config.seed,
        "duality_gap": model.duality_gap,
        "epochs": model.epochs,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    body = (
        _MODEL_MAGIC
        + struct.pack("<HI", _MODEL_VERSION, len(blob))
        + blob
        + model.weights.astype("<f8").tobytes()
        + struct.pack("<d", model.bias)
    )
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_model(path) -> SvmModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MODEL_MAGIC:
        raise ValueError(f"not a model file (magic {data[:4]!r})")
    if len(data) < 14:
        raise ValueError("model file truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != crc:
        raise ValueError("model file checksum mismatch")
    version, hlen = struct.unpack_from("<HI", data, 4)
    if version != _MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    pos = 10
    header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    pos += hlen
    dim = header["dim"]
    expected = dim * 8 + 8
    if len(body) - pos != expected:
        raise ValueError(f"model payload is {len(body) - pos} bytes, expected {expected}")
    weights = np.frombuffer(data[pos : pos + dim * 8], dtype="<f8").copy()
    (bias,) = struct.unpack_from("<d", data, pos + dim * 8)
    cfg = SvmConfig(C=header["C"], tol=header["tol"], max_iter=header["max_iter"], seed=header["seed"])
    return SvmModel(
        weights=weights,
        bias=bias,
        label_map={-1: header["labels"][0], 1: header["labels"][1]},
        fingerprint=header["fingerprint"],
        config=cfg,
        duality_gap=header["duality_gap"],
        epochs=header["epochs"],
    )
