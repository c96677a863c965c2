"""Experiment protocols: subject-disjoint splits, repetition reports,
cross-dataset scoring, subgroup and blur sweeps, stratified breakdowns.

The protocol throughout: balance classes by subsampling the majority at
the subject level, split subjects per class into train/test by a fixed
fraction, repeat with fresh seeded shuffles, train one model per
repetition, and report image-level accuracy as mean and population
standard deviation over repetitions.  Every reported number is a pure
function of the persisted per-image prediction log.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .align import AlignParams, InsufficientBorder, Region
from .dataset import ATTRIBUTE_CLASSES, DatasetManifest, filter_records
from .descriptors import Descriptor
from .features import CELL_SIZE, FeatureVector, extract_features
from .image import gaussian_blur, load_pgm
from .svm import SvmConfig, SvmModel, decision_value, train_svm

__all__ = [
    "Repetition",
    "SplitPlan",
    "PredictionEntry",
    "EvalReport",
    "ExperimentResult",
    "BlurSweepResult",
    "StratumStats",
    "StratifiedReport",
    "make_splits",
    "run_experiment",
    "cross_dataset_eval",
    "subgroup_experiment",
    "blur_experiment",
    "stratified_report",
    "report_from_entries",
    "load_prediction_log",
    "save_prediction_log",
    "format_report",
    "report_csv_rows",
    "format_blur_table",
    "format_strata",
]

log = logging.getLogger(__name__)


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Repetition:
    index: int
    seed: int
    train_subjects: frozenset[str]
    test_subjects: frozenset[str]


@dataclass(frozen=True)
class SplitPlan:
    attribute: str
    train_frac: float
    repetitions: tuple[Repetition, ...]
    excluded_unknown: int


@dataclass(frozen=True)
class PredictionEntry:
    image_path: str
    repetition: int
    true_label: str
    predicted_label: str
    decision_value: float


@dataclass(frozen=True)
class EvalReport:
    attribute: str
    classes: tuple[str, str]
    per_rep_accuracy: tuple[float, ...]
    mean_accuracy: float
    std_accuracy: float  # population std over repetitions
    # confusion[true][pred] = (mean %, std %) over repetitions, rows normalized
    confusion: dict[str, dict[str, tuple[float, float]]]
    n_entries: int
    n_dropped: int


@dataclass(frozen=True)
class ExperimentResult:
    plan: SplitPlan
    report: EvalReport
    models: tuple[SvmModel, ...]
    entries: tuple[PredictionEntry, ...]
    dropped: tuple[tuple[str, str], ...]  # (image_path, reason)


def _subject_labels(manifest: DatasetManifest, attribute: str) -> dict[str, str]:
    labels: dict[str, str] = {}
    for r in manifest:
        value = r.label(attribute)
        if value == "unknown":
            continue
        prior = labels.get(r.subject_id)
        if prior is not None and prior != value:
            raise ValueError(
                f"subject {r.subject_id!r} has conflicting {attribute} labels "
                f"{prior!r} and {value!r}"
            )
        labels[r.subject_id] = value
    return labels


def make_splits(
    manifest: DatasetManifest,
    attribute: str,
    train_frac: float = 0.6,
    reps: int = 5,
    seed: int = 0,
) -> SplitPlan:
    """Build subject-disjoint balanced splits.

    The majority class is subsampled once, at the subject level, down to
    the minority subject count; each repetition then sends
    floor(train_frac * count) subjects per class to train and the rest to
    test.  Images whose attribute label is "unknown" are excluded (count
    logged and recorded on the plan).
    """
    if attribute not in ATTRIBUTE_CLASSES:
        raise ValueError(f"unknown attribute {attribute!r}")
    if not (0 < train_frac < 1):
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")

    excluded = sum(1 for r in manifest if r.label(attribute) == "unknown")
    if excluded:
        log.info("excluding %d images with unknown %s", excluded, attribute)
    labels = _subject_labels(manifest, attribute)
    classes = ATTRIBUTE_CLASSES[attribute]
    by_class = {c: sorted(s for s, v in labels.items() if v == c) for c in classes}
    for c, subjects in by_class.items():
        if not subjects:
            raise ValueError(f"class {c!r} has no subjects with known {attribute}")

    minority = min(len(s) for s in by_class.values())
    balance_rng = np.random.default_rng(_derive_seed(seed, 0))
    balanced: dict[str, list[str]] = {}
    for c in classes:  # fixed class order keeps the draw deterministic
        subjects = by_class[c]
        if len(subjects) > minority:
            picked = balance_rng.choice(len(subjects), size=minority, replace=False)
            subjects = [subjects[i] for i in sorted(picked)]
        balanced[c] = subjects

    n_train = math.floor(train_frac * minority)
    if n_train < 1 or n_train >= minority:
        raise ValueError(
            f"train fraction {train_frac} leaves no usable split for "
            f"{minority} subjects per class"
        )
    repetitions = []
    for rep in range(reps):
        rep_seed = _derive_seed(seed, 1 + rep)
        rng = np.random.default_rng(rep_seed)
        train: set[str] = set()
        test: set[str] = set()
        for c in classes:
            order = rng.permutation(len(balanced[c]))
            chosen = [balanced[c][i] for i in order]
            train.update(chosen[:n_train])
            test.update(chosen[n_train:])
        repetitions.append(
            Repetition(rep, rep_seed, frozenset(train), frozenset(test))
        )
    return SplitPlan(attribute, train_frac, tuple(repetitions), excluded)


# ---------------------------------------------------------------------------
# Feature extraction over manifests, with drop accounting.


def _extract_all(
    records,
    sel: Region,
    descriptor: Descriptor,
    params: AlignParams,
    cell: int,
    sigma: float | None = None,
):
    """Features per image path; InsufficientBorder images are dropped with a reason."""
    features: dict[str, FeatureVector] = {}
    dropped: list[tuple[str, str]] = []
    for r in records:
        if r.image_path in features:
            continue
        img = load_pgm(r.image_path)
        if sigma:
            img = gaussian_blur(img, sigma)
        try:
            features[r.image_path] = extract_features(
                img, r.geometry, sel, descriptor, params, cell
            )
        except InsufficientBorder as err:
            dropped.append((r.image_path, str(err)))
    if dropped:
        log.info("dropped %d images during extraction", len(dropped))
    return features, dropped


def report_from_entries(
    entries,
    attribute: str,
    n_dropped: int = 0,
) -> EvalReport:
    """Reduce a prediction log to the accuracy/confusion report."""
    classes = ATTRIBUTE_CLASSES[attribute]
    reps = sorted({e.repetition for e in entries})
    if not reps:
        raise ValueError("prediction log is empty")
    per_rep = []
    rows: dict[str, dict[str, list[float]]] = {
        t: {p: [] for p in classes} for t in classes
    }
    for rep in reps:
        sub = [e for e in entries if e.repetition == rep]
        correct = sum(1 for e in sub if e.predicted_label == e.true_label)
        per_rep.append(100.0 * correct / len(sub))
        for t in classes:
            of_class = [e for e in sub if e.true_label == t]
            if not of_class:
                continue
            for p in classes:
                hits = sum(1 for e in of_class if e.predicted_label == p)
                rows[t][p].append(100.0 * hits / len(of_class))
    acc = np.asarray(per_rep)
    confusion = {
        t: {
            p: (
                (float(np.mean(v)), float(np.std(v))) if v else (float("nan"), float("nan"))
            )
            for p, v in row.items()
        }
        for t, row in rows.items()
    }
    return EvalReport(
        attribute=attribute,
        classes=classes,
        per_rep_accuracy=tuple(float(a) for a in per_rep),
        mean_accuracy=float(acc.mean()),
        std_accuracy=float(acc.std()),
        confusion=confusion,
        n_entries=len(entries),
        n_dropped=n_dropped,
    )


def _score(models_by_rep, test_records_by_rep, features, attribute):
    entries = []
    for rep, model in models_by_rep:
        for r in test_records_by_rep[rep]:
            fv = features.get(r.image_path)
            if fv is None:
                continue
            value = decision_value(model, fv)
            pred = model.label_map[1 if value >= 0 else -1]
            entries.append(
                PredictionEntry(r.image_path, rep, r.label(attribute), pred, value)
            )
    return entries


def run_experiment(
    manifest: DatasetManifest,
    plan: SplitPlan,
    sel: Region,
    descriptor: Descriptor,
    *,
    params: AlignParams = AlignParams(),
    cell: int = CELL_SIZE,
    svm: SvmConfig = SvmConfig(),
) -> ExperimentResult:
    """Train and score one model per repetition of the plan."""
    attribute = plan.attribute
    used_subjects = set()
    for rep in plan.repetitions:
        used_subjects |= rep.train_subjects | rep.test_subjects
    records = [
        r
        for r in manifest
        if r.subject_id in used_subjects and r.label(attribute) != "unknown"
    ]
    features, dropped = _extract_all(records, sel, descriptor, params, cell)

    models = []
    test_records_by_rep = {}
    for rep in plan.repetitions:
        train = [r for r in records if r.subject_id in rep.train_subjects and r.image_path in features]
        test = [r for r in records if r.subject_id in rep.test_subjects and r.image_path in features]
        # Subject disjointness between the realized sets is a hard invariant.
        assert not ({r.subject_id for r in train} & {r.subject_id for r in test})
        cfg = SvmConfig(
            C=svm.C, tol=svm.tol, max_iter=svm.max_iter, seed=_derive_seed(svm.seed, rep.index)
        )
        model = train_svm([features[r.image_path] for r in train], [r.label(attribute) for r in train], cfg)
        models.append(model)
        test_records_by_rep[rep.index] = test

    entries = _score(
        [(rep.index, models[i]) for i, rep in enumerate(plan.repetitions)],
        test_records_by_rep,
        features,
        attribute,
    )
    report = report_from_entries(entries, attribute, n_dropped=len(dropped))
    return ExperimentResult(plan, report, tuple(models), tuple(entries), tuple(dropped))


def cross_dataset_eval(
    models,
    other: DatasetManifest,
    sel: Region,
    descriptor: Descriptor,
    *,
    attribute: str | None = None,
    params: AlignParams = AlignParams(),
    cell: int = CELL_SIZE,
):
    """Score every image of ``other`` with each trained model.

    Each model acts as one repetition; the report's mean/std are over
    models.  The attribute is inferred from the models' label names when
    not given.
    """
    if not models:
        raise ValueError("need at least one model")
    fingerprints = {m.fingerprint for m in models}
    if len(fingerprints) > 1:
        raise ValueError(f"models disagree on feature fingerprints: {sorted(fingerprints)}")
    names = {models[0].label_map[-1], models[0].label_map[1]}
    if attribute is None:
        matches = [a for a, cs in ATTRIBUTE_CLASSES.items() if set(cs) == names]
        if not matches:
            raise ValueError(f"cannot infer attribute from labels {sorted(names)}")
        attribute = matches[0]
    records = [r for r in other if r.label(attribute) != "unknown"]
    n_unknown = len(other) - len(records)
    if n_unknown:
        log.info("excluding %d images with unknown %s", n_unknown, attribute)
    features, dropped = _extract_all(records, sel, descriptor, params, cell)
    test_by_rep = {i: records for i in range(len(models))}
    entries = _score(list(enumerate(models)), test_by_rep, features, attribute)
    report = report_from_entries(entries, attribute, n_dropped=len(dropped))
    return ExperimentResult(
        SplitPlan(attribute, 0.0, (), n_unknown), report, tuple(models), tuple(entries), tuple(dropped)
    )


def subgroup_experiment(
    manifest: DatasetManifest,
    attribute: str,
    train_filter: dict,
    test_filter: dict,
    sel: Region,
    descriptor: Descriptor,
    *,
    train_frac: float = 0.6,
    reps: int = 5,
    seed: int = 0,
    params: AlignParams = AlignParams(),
    cell: int = CELL_SIZE,
    svm: SvmConfig = SvmConfig(),
) -> ExperimentResult:
    """Train inside one subgroup, test inside another.

    When both filters select the same subjects, this is the standard
    protocol run within the subgroup (held-out balanced test sets).
    Otherwise each repetition's test set is the full test subgroup minus
    that repetition's training subjects, so overlapping filters can never
    leak a subject across the split.
    """
    train_m = filter_records(manifest, **train_filter)
    test_m = filter_records(manifest, **test_filter)
    if not len(train_m):
        raise ValueError(f"train filter {train_filter} matches no records")
    if not len(test_m):
        raise ValueError(f"test filter {test_filter} matches no records")
    plan = make_splits(train_m, attribute, train_frac, reps, seed)

    held_out = train_m.subjects() == test_m.subjects()
    train_features, train_dropped = _extract_all(
        [r for r in train_m if r.label(attribute) != "unknown"], sel, descriptor, params, cell
    )
    test_known = [r for r in test_m if r.label(attribute) != "unknown"]
    test_features, test_dropped = _extract_all(test_known, sel, descriptor, params, cell)

    models = []
    test_records_by_rep = {}
    for rep in plan.repetitions:
        train = [
            r
            for r in train_m
            if r.subject_id in rep.train_subjects and r.image_path in train_features
        ]
        if held_out:
            test = [
                r
                for r in test_known
                if r.subject_id in rep.test_subjects and r.image_path in test_features
            ]
        else:
            test = [
                r
                for r in test_known
                if r.subject_id not in rep.train_subjects and r.image_path in test_features
            ]
        assert not ({r.subject_id for r in train} & {r.subject_id for r in test})
        cfg = SvmConfig(
            C=svm.C, tol=svm.tol, max_iter=svm.max_iter, seed=_derive_seed(svm.seed, rep.index)
        )
        model = train_svm(
            [train_features[r.image_path] for r in train],
            [r.label(attribute) for r in train],
            cfg,
        )
        models.append(model)
        test_records_by_rep[rep.index] = test

    merged = dict(test_features)
    entries = _score(
        [(rep.index, models[i]) for i, rep in enumerate(plan.repetitions)],
        test_records_by_rep,
        merged,
        attribute,
    )
    dropped = tuple(train_dropped) + tuple(d for d in test_dropped if d not in train_dropped)
    report = report_from_entries(entries, attribute, n_dropped=len(dropped))
    return ExperimentResult(plan, report, tuple(models), tuple(entries), dropped)


@dataclass(frozen=True)
class BlurSweepResult:
    baseline: ExperimentResult
    # sigma -> report over the same models with blurred test images; key 0.0
    # is the baseline report itself (blur is never applied at sigma 0).
    reports: dict[float, EvalReport]
    entries: dict[float, tuple[PredictionEntry, ...]]


def blur_experiment(
    manifest: DatasetManifest,
    plan: SplitPlan,
    sel: Region,
    descriptor: Descriptor,
    sigmas=(2.0, 4.0, 6.0, 8.0, 10.0),
    *,
    params: AlignParams = AlignParams(),
    cell: int = CELL_SIZE,
    svm: SvmConfig = SvmConfig(),
) -> BlurSweepResult:
    """Degrade only the test images; the trained models never change."""
    if any(s <= 0 for s in sigmas):
        raise ValueError("sigmas must be positive; the unblurred baseline is implicit")
    base = run_experiment(manifest, plan, sel, descriptor, params=params, cell=cell, svm=svm)
    attribute = plan.attribute
    reports: dict[float, EvalReport] = {0.0: base.report}
    entries: dict[float, tuple[PredictionEntry, ...]] = {0.0: base.entries}
    test_records_by_rep = {
        rep.index: [
            r
            for r in manifest
            if r.subject_id in rep.test_subjects and r.label(attribute) != "unknown"
        ]
        for rep in plan.repetitions
    }
    union: list = []
    seen = set()
    for recs in test_records_by_rep.values():
        for r in recs:
            if r.image_path not in seen:
                seen.add(r.image_path)
                union.append(r)
    for sigma in sigmas:
        features, dropped = _extract_all(union, sel, descriptor, params, cell, sigma=float(sigma))
        sigma_entries = _score(
            [(rep.index, base.models[i]) for i, rep in enumerate(plan.repetitions)],
            test_records_by_rep,
            features,
            attribute,
        )
        reports[float(sigma)] = report_from_entries(sigma_entries, attribute, n_dropped=len(dropped))
        entries[float(sigma)] = tuple(sigma_entries)
    return BlurSweepResult(base, reports, entries)


# ---------------------------------------------------------------------------
# Stratified breakdowns of an existing prediction log.


@dataclass(frozen=True)
class StratumStats:
    value: str
    n_images: int
    per_rep_accuracy: tuple[float, ...]
    mean_accuracy: float
    std_accuracy: float
    reps_with_data: int


@dataclass(frozen=True)
class StratifiedReport:
    by: str
    strata: tuple[StratumStats, ...]
    omitted: tuple[str, ...]  # values with zero test images


def stratified_report(entries, manifest: DatasetManifest, by: str) -> StratifiedReport:
    """Per-value accuracy over an existing log, e.g. by eye_color or sensor."""
    lookup = {r.image_path: getattr(r, by) for r in manifest}
    reps = sorted({e.repetition for e in entries})
    values = sorted(set(lookup.values()))
    strata = []
    omitted = []
    for value in values:
        sub = [e for e in entries if lookup.get(e.image_path) == value]
        if not sub:
            omitted.append(value)
            continue
        per_rep = []
        for rep in reps:
            rep_sub = [e for e in sub if e.repetition == rep]
            if rep_sub:
                correct = sum(1 for e in rep_sub if e.predicted_label == e.true_label)
                per_rep.append(100.0 * correct / len(rep_sub))
        acc = np.asarray(per_rep)
        strata.append(
            StratumStats(
                value=value,
                n_images=len(sub),
                per_rep_accuracy=tuple(float(a) for a in per_rep),
                mean_accuracy=float(acc.mean()),
                std_accuracy=float(acc.std()),
                reps_with_data=len(per_rep),
            )
        )
    return StratifiedReport(by, tuple(strata), tuple(omitted))


# ---------------------------------------------------------------------------
# Prediction log persistence (CSV); reports are re-derivable from this file.

_LOG_FIELDS = ("image_path", "repetition", "true_label", "predicted_label", "decision_value")


def save_prediction_log(path, entries) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_LOG_FIELDS)
        for e in entries:
            writer.writerow(
                [e.image_path, e.repetition, e.true_label, e.predicted_label, repr(e.decision_value)]
            )


def load_prediction_log(path) -> tuple[PredictionEntry, ...]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _LOG_FIELDS:
            raise ValueError(f"bad prediction log header {header}")
        return tuple(
            PredictionEntry(row[0], int(row[1]), row[2], row[3], float(row[4]))
            for row in reader
        )


# ---------------------------------------------------------------------------
# Deterministic report rendering (text for humans, CSV rows for machines).


def format_report(report: EvalReport) -> str:
    lines = [
        f"attribute: {report.attribute}",
        f"classes: {report.classes[0]}, {report.classes[1]}",
        f"repetitions: {len(report.per_rep_accuracy)}",
        f"images scored: {report.n_entries}",
        f"images dropped: {report.n_dropped}",
        "accuracy per repetition (%): "
        + ", ".join(f"{a:.2f}" for a in report.per_rep_accuracy),
        f"accuracy mean (%): {report.mean_accuracy:.2f}",
        f"accuracy std (%, population over repetitions): {report.std_accuracy:.2f}",
        "confusion (row-normalized %, mean +- std over repetitions):",
    ]
    for t in report.classes:
        cells = []
        for p in report.classes:
            mean, std = report.confusion[t][p]
            if math.isnan(mean):
                cells.append(f"predicted {p}: -")
            else:
                cells.append(f"predicted {p}: {mean:.2f} +- {std:.2f}")
        lines.append(f"  true {t}: " + " | ".join(cells))
    return "\n".join(lines) + "\n"


def report_csv_rows(report: EvalReport) -> list[tuple[str, str]]:
    rows = [
        ("attribute", report.attribute),
        ("class_neg", report.classes[0]),
        ("class_pos", report.classes[1]),
        ("n_entries", str(report.n_entries)),
        ("n_dropped", str(report.n_dropped)),
    ]
    for i, a in enumerate(report.per_rep_accuracy):
        rows.append((f"accuracy_rep_{i}", repr(a)))
    rows.append(("accuracy_mean", repr(report.mean_accuracy)))
    rows.append(("accuracy_std", repr(report.std_accuracy)))
    for t in report.classes:
        for p in report.classes:
            mean, std = report.confusion[t][p]
            rows.append((f"confusion_{t}_{p}_mean", repr(mean)))
            rows.append((f"confusion_{t}_{p}_std", repr(std)))
    return rows


def format_blur_table(reports: dict[float, EvalReport]) -> str:
    lines = ["sigma  accuracy_mean  accuracy_std"]
    for sigma in sorted(reports):
        r = reports[sigma]
        lines.append(f"{sigma:<6g} {r.mean_accuracy:>13.2f} {r.std_accuracy:>12.2f}")
    return "\n".join(lines) + "\n"


def format_strata(sr: StratifiedReport) -> str:
    lines = [f"stratified by: {sr.by}"]
    for s in sr.strata:
        lines.append(
            f"  {s.value}: mean {s.mean_accuracy:.2f} +- {s.std_accuracy:.2f} "
            f"({s.n_images} images, {s.reps_with_data} repetitions with data)"
        )
    for value in sr.omitted:
        lines.append(f"  {value}: omitted (zero test images)")
    return "\n".join(lines) + "\n"
