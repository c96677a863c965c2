"""Dataset manifests: one CSV row per image with labels and iris geometry.

Header (exact): image_path,subject_id,eye,sensor,gender,race,eye_color,
iris_x,iris_y,iris_r.  Eye is L or R; gender, race, and eye_color are
lowercase enums with "unknown" allowed.  Relative image paths resolve
against the manifest's directory.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

from .align import OcularGeometry

__all__ = [
    "GENDERS",
    "RACES",
    "EYE_COLORS",
    "EYES",
    "MANIFEST_FIELDS",
    "ManifestError",
    "SampleRecord",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",
    "filter_records",
    "ATTRIBUTE_CLASSES",
]

MANIFEST_FIELDS = (
    "image_path",
    "subject_id",
    "eye",
    "sensor",
    "gender",
    "race",
    "eye_color",
    "iris_x",
    "iris_y",
    "iris_r",
)

EYES = ("L", "R")
GENDERS = ("female", "male", "unknown")
RACES = ("caucasian", "non_caucasian", "unknown")
EYE_COLORS = ("brown", "blue", "green", "hazel", "gray", "other", "unknown")

# Binary attributes an experiment can target, with their class names.
ATTRIBUTE_CLASSES = {
    "gender": ("female", "male"),
    "race": ("caucasian", "non_caucasian"),
}


class ManifestError(ValueError):
    """Malformed manifest content; messages carry 1-based row numbers."""


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    subject_id: str
    eye: str
    sensor: str
    gender: str
    race: str
    eye_color: str
    geometry: OcularGeometry

    def label(self, attribute: str) -> str:
        if attribute not in ATTRIBUTE_CLASSES:
            raise ValueError(f"unknown attribute {attribute!r}")
        return getattr(self, attribute)


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[SampleRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def subjects(self) -> set[str]:
        return {r.subject_id for r in self.records}

    def count_by(self, field: str) -> dict[str, int]:
        """Images per value of a record field, sorted by value."""
        counts: dict[str, int] = {}
        for r in self.records:
            counts[getattr(r, field)] = counts.get(getattr(r, field), 0) + 1
        return dict(sorted(counts.items()))

    def subjects_by(self, field: str) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for r in self.records:
            out.setdefault(getattr(r, field), set()).add(r.subject_id)
        return dict(sorted(out.items()))

    def missing_files(self) -> list[str]:
        return [r.image_path for r in self.records if not os.path.isfile(r.image_path)]


def _parse_row(row: dict, rownum: int, base: str) -> SampleRecord:
    def bad(msg: str):
        raise ManifestError(f"row {rownum}: {msg}")

    for name in MANIFEST_FIELDS:
        if row.get(name) is None or row[name] == "":
            bad(f"missing value for {name!r}")
    if row["eye"] not in EYES:
        bad(f"eye must be one of {EYES}, got {row['eye']!r}")
    if row["gender"] not in GENDERS:
        bad(f"gender must be one of {GENDERS}, got {row['gender']!r}")
    if row["race"] not in RACES:
        bad(f"race must be one of {RACES}, got {row['race']!r}")
    if row["eye_color"] not in EYE_COLORS:
        bad(f"eye_color must be one of {EYE_COLORS}, got {row['eye_color']!r}")
    try:
        x, y, r = (float(row[k]) for k in ("iris_x", "iris_y", "iris_r"))
    except ValueError:
        bad("iris_x, iris_y, iris_r must be numeric")
    if r <= 0:
        bad(f"iris_r must be positive, got {r}")
    path = row["image_path"]
    if not os.path.isabs(path):
        path = os.path.normpath(os.path.join(base, path))
    return SampleRecord(
        image_path=path,
        subject_id=row["subject_id"],
        eye=row["eye"],
        sensor=row["sensor"],
        gender=row["gender"],
        race=row["race"],
        eye_color=row["eye_color"],
        geometry=OcularGeometry(x, y, r),
    )


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest CSV.  Errors name the offending row."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("row 1: empty manifest") from None
        if tuple(header) != MANIFEST_FIELDS:
            raise ManifestError(
                f"row 1: header must be {','.join(MANIFEST_FIELDS)}, got {','.join(header)}"
            )
        records = []
        seen: dict[str, int] = {}
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_FIELDS):
                raise ManifestError(
                    f"row {rownum}: expected {len(MANIFEST_FIELDS)} fields, got {len(row)}"
                )
            rec = _parse_row(dict(zip(MANIFEST_FIELDS, row)), rownum, base)
            if rec.image_path in seen:
                raise ManifestError(
                    f"row {rownum}: duplicate image_path {rec.image_path!r} "
                    f"(first listed at row {seen[rec.image_path]})"
                )
            seen[rec.image_path] = rownum
            records.append(rec)
    return DatasetManifest(tuple(records))


def _format_float(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(v)


def save_manifest(path, manifest: DatasetManifest) -> None:
    """Canonical CSV writer; paths are relativized to the target directory."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_FIELDS)
        for r in manifest:
            p = r.image_path
            rel = os.path.relpath(p, base)
            if not rel.startswith(".."):
                p = rel
            writer.writerow(
                [
                    p,
                    r.subject_id,
                    r.eye,
                    r.sensor,
                    r.gender,
                    r.race,
                    r.eye_color,
                    _format_float(r.geometry.center_x),
                    _format_float(r.geometry.center_y),
                    _format_float(r.geometry.radius),
                ]
            )


def filter_records(manifest: DatasetManifest, pred=None, **field_values) -> DatasetManifest:
    """Keep records matching a predicate and/or exact field values; order stable."""
    for name in field_values:
        if name not in MANIFEST_FIELDS[:7]:
            raise ValueError(f"cannot filter on {name!r}")
    kept = []
    for r in manifest:
        if pred is not None and not pred(r):
            continue
        if all(getattr(r, k) == v for k, v in field_values.items()):
            kept.append(r)
    return DatasetManifest(tuple(kept))
