"""Synthetic near-infrared-style eye images with controllable structure.

Each subject gets a base template: a bright sclera field, a darker iris
disc at a randomized center and radius, and a dark pupil.  Class
membership plants oriented band-pass noise: the race-like attribute
textures the iris interior, the gender-like attribute textures the
surrounding field at milder contrast.  Per-image jitter shifts the whole
eye by a few pixels and nudges illumination.  The generator writes PGM
files, an exact-geometry manifest, and a generation ledger so tests can
assert against planted structure.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .align import OcularGeometry
from .dataset import (
    ATTRIBUTE_CLASSES,
    EYES,
    DatasetManifest,
    SampleRecord,
    save_manifest,
)
from .image import quantize_u8, write_pgm

__all__ = ["TextureParams", "SynthSpec", "generate", "band_noise"]

MAX_CONTRAST = 80.0
MAX_SHIFT = 5
MAX_ILLUMINATION = 10

SCLERA_LEVEL = 170.0
IRIS_LEVEL = 100.0
PUPIL_LEVEL = 25.0
PUPIL_RATIO = 0.45


@dataclass(frozen=True)
class TextureParams:
    """Oriented band-pass noise: center frequency (cycles/pixel), orientation
    (radians), contrast (standard deviation in gray levels)."""

    frequency: float
    orientation: float
    contrast: float

    def __post_init__(self):
        if not (0 < self.frequency < 0.5):
            raise ValueError(f"frequency must be in (0, 0.5), got {self.frequency}")
        if not (0 <= self.contrast <= MAX_CONTRAST):
            raise ValueError(f"contrast must be in [0, {MAX_CONTRAST}], got {self.contrast}")


def _default_iris_textures() -> dict[str, TextureParams]:
    return {
        "caucasian": TextureParams(0.05, math.pi / 4, 40.0),
        "non_caucasian": TextureParams(0.25, math.pi / 4, 40.0),
    }


def _default_field_textures() -> dict[str, TextureParams]:
    return {
        "female": TextureParams(0.02, 0.0, 20.0),
        "male": TextureParams(0.05, math.pi / 2, 20.0),
    }


def _default_color_mix() -> dict[str, float]:
    return {"brown": 0.45, "blue": 0.30, "green": 0.15, "hazel": 0.10}


@dataclass(frozen=True)
class SynthSpec:
    subjects_per_class: int = 20
    images_per_subject: int = 3
    image_size: tuple[int, int] = (640, 480)  # (width, height)
    iris_radius_range: tuple[float, float] = (55.0, 75.0)
    iris_textures: dict[str, TextureParams] = field(default_factory=_default_iris_textures)
    field_textures: dict[str, TextureParams] = field(default_factory=_default_field_textures)
    eye_color_mix: dict[str, float] = field(default_factory=_default_color_mix)
    # Optional per-color contrast multiplier, for planting strata gaps.
    eye_color_contrast: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.subjects_per_class < 1 or self.images_per_subject < 1:
            raise ValueError("need at least one subject and one image per subject")
        if self.subjects_per_class % 2:
            raise ValueError(
                "subjects_per_class must be even so both attributes stay balanced"
            )
        if set(self.iris_textures) != set(ATTRIBUTE_CLASSES["race"]):
            raise ValueError("iris_textures must cover both race classes")
        if set(self.field_textures) != set(ATTRIBUTE_CLASSES["gender"]):
            raise ValueError("field_textures must cover both gender classes")
        w, h = self.image_size
        lo, hi = self.iris_radius_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad iris radius range {self.iris_radius_range}")
        if hi * 2.5 > min(w, h):
            raise ValueError("iris radius range too large for the image size")
        total = sum(self.eye_color_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"eye_color_mix must sum to 1, got {total}")


def band_noise(
    shape: tuple[int, int], params: TextureParams, rng: np.random.Generator
) -> np.ndarray:
    """Unit-variance noise whose spectrum concentrates at +-frequency along
    the given orientation (Gaussian bumps in the frequency plane)."""
    h, w = shape
    white = rng.standard_normal((h, w))
    spectrum = np.fft.fft2(white)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    f0x = params.frequency * math.cos(params.orientation)
    f0y = params.frequency * math.sin(params.orientation)
    width = max(params.frequency / 3.0, 0.004)
    gain = np.exp(-((fx - f0x) ** 2 + (fy - f0y) ** 2) / (2 * width**2))
    gain += np.exp(-((fx + f0x) ** 2 + (fy + f0y) ** 2) / (2 * width**2))
    shaped = np.fft.ifft2(spectrum * gain).real
    sd = shaped.std()
    if sd <= 0:
        raise ValueError("degenerate band-pass draw")
    return shaped / sd


@dataclass(frozen=True)
class _Subject:
    subject_id: str
    gender: str
    race: str
    eye_color: str
    base_cx: float
    base_cy: float
    radius: float


def _assign_subjects(spec: SynthSpec, rng: np.random.Generator) -> list[_Subject]:
    w, h = spec.image_size
    lo, hi = spec.iris_radius_range
    colors = sorted(spec.eye_color_mix)
    probs = np.asarray([spec.eye_color_mix[c] for c in colors])
    subjects = []
    total = 2 * spec.subjects_per_class
    for i in range(total):
        gender = "female" if i < spec.subjects_per_class else "male"
        race = "caucasian" if i % 2 == 0 else "non_caucasian"
        color = colors[int(rng.choice(len(colors), p=probs))]
        radius = float(rng.uniform(lo, hi))
        base_cx = w / 2 + float(rng.uniform(-3, 3))
        base_cy = h / 2 + float(rng.uniform(-3, 3))
        subjects.append(
            _Subject(f"s{i:04d}", gender, race, color, base_cx, base_cy, radius)
        )
    return subjects


def _render_subject_canvas(
    spec: SynthSpec, subject: _Subject, rng: np.random.Generator
) -> np.ndarray:
    """Float canvas with margin so per-image shifts are pure crops."""
    w, h = spec.image_size
    margin = MAX_SHIFT + 3
    ch, cw = h + 2 * margin, w + 2 * margin
    cx = subject.base_cx + margin
    cy = subject.base_cy + margin

    mult = spec.eye_color_contrast.get(subject.eye_color, 1.0)
    field_p = spec.field_textures[subject.gender]
    iris_p = spec.iris_textures[subject.race]

    canvas = np.full((ch, cw), SCLERA_LEVEL + float(rng.uniform(-8, 8)))
    canvas += band_noise((ch, cw), field_p, rng) * (field_p.contrast * mult)

    yy, xx = np.ogrid[:ch, :cw]
    dist2 = (xx - cx) ** 2 + (yy - cy) ** 2
    iris = dist2 < subject.radius**2
    iris_tex = band_noise((ch, cw), iris_p, rng) * (iris_p.contrast * mult)
    canvas[iris] = IRIS_LEVEL + iris_tex[iris]
    pupil = dist2 < (PUPIL_RATIO * subject.radius) ** 2
    canvas[pupil] = PUPIL_LEVEL
    return canvas


def generate(spec: SynthSpec, out_dir) -> DatasetManifest:
    """Write images, ``manifest.csv``, and ``ledger.csv`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    root = np.random.SeedSequence(spec.seed)
    subjects = _assign_subjects(spec, np.random.default_rng(root.spawn(1)[0]))

    w, h = spec.image_size
    margin = MAX_SHIFT + 3
    records = []
    sensors = ("sensorA", "sensorB")
    for index, subject in enumerate(subjects):
        stream = np.random.SeedSequence([spec.seed, 1000 + index])
        canvas_rng, *image_rngs = [
            np.random.default_rng(s) for s in stream.spawn(1 + spec.images_per_subject)
        ]
        canvas = _render_subject_canvas(spec, subject, canvas_rng)
        for j, rng in enumerate(image_rngs):
            dx = int(rng.integers(-MAX_SHIFT, MAX_SHIFT + 1))
            dy = int(rng.integers(-MAX_SHIFT, MAX_SHIFT + 1))
            level = float(rng.integers(-MAX_ILLUMINATION, MAX_ILLUMINATION + 1))
            y0 = margin - dy
            x0 = margin - dx
            img = quantize_u8(canvas[y0 : y0 + h, x0 : x0 + w] + level)
            name = f"{subject.subject_id}_{j}.pgm"
            write_pgm(os.path.join(out_dir, name), img)
            records.append(
                SampleRecord(
                    image_path=os.path.join(os.path.abspath(out_dir), name),
                    subject_id=subject.subject_id,
                    eye=EYES[j % 2],
                    sensor=sensors[j % 2],
                    gender=subject.gender,
                    race=subject.race,
                    eye_color=subject.eye_color,
                    geometry=OcularGeometry(
                        subject.base_cx + dx, subject.base_cy + dy, subject.radius
                    ),
                )
            )

    manifest = DatasetManifest(tuple(records))
    save_manifest(os.path.join(out_dir, "manifest.csv"), manifest)
    _write_ledger(os.path.join(out_dir, "ledger.csv"), spec, subjects)
    return manifest


def _write_ledger(path, spec: SynthSpec, subjects) -> None:
    """Per-class and per-color counts plus the planted texture parameters."""
    rows = [("kind", "value", "subjects", "images", "detail")]
    n = spec.images_per_subject

    def add(kind, value, members, detail=""):
        rows.append((kind, value, str(len(members)), str(len(members) * n), detail))

    for attr in ("gender", "race"):
        for cls in ATTRIBUTE_CLASSES[attr]:
            members = [s for s in subjects if getattr(s, attr) == cls]
            textures = spec.field_textures if attr == "gender" else spec.iris_textures
            p = textures[cls]
            add(
                attr,
                cls,
                members,
                f"frequency={p.frequency} orientation={p.orientation} contrast={p.contrast}",
            )
    for color in sorted({s.eye_color for s in subjects}):
        members = [s for s in subjects if s.eye_color == color]
        add(
            "eye_color",
            color,
            members,
            f"contrast_mult={spec.eye_color_contrast.get(color, 1.0)}",
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)
