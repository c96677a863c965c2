"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error (malformed or missing
inputs, output collisions), 3 numeric failure (non-convergence).

Experiment commands (evaluate, cross-eval, subgroup-eval, blur-eval,
stratify) write into an immutable directory named by the hash of the
resolved configuration; the exact config is serialized next to the
results, and re-running from it reproduces every file byte for byte.
Any flag may also be supplied via ``--config file.json``; explicit flags
win over the file.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import json
import math
import os
import sys

import numpy as np

from .align import AlignParams, InsufficientBorder, Region
from .dataset import (
    ATTRIBUTE_CLASSES,
    ManifestError,
    load_manifest,
)
from .descriptors import (
    IcaConvergenceError,
    default_bank,
    descriptor_from_name,
    learn_filters,
    load_bank,
    save_bank,
)
from .experiments import (
    blur_experiment,
    cross_dataset_eval,
    format_blur_table,
    format_report,
    format_strata,
    load_prediction_log,
    make_splits,
    report_csv_rows,
    run_experiment,
    save_prediction_log,
    stratified_report,
    subgroup_experiment,
)
from .features import CELL_SIZE, extract_features, save_features
from .image import PgmFormatError, load_pgm
from .svm import SvmConfig, decision_value, load_model, save_model, train_svm
from .synth import SynthSpec, TextureParams, generate

__all__ = ["main", "entry"]


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


# Defaults live here, not in add_argument, so that config-file values can
# sit between defaults and explicit flags.
_DEFAULTS = {
    "synth": {
        "subjects_per_class": 20,
        "images_per_subject": 3,
        "size": "640x480",
        "seed": 0,
        "iris_freqs": "0.05,0.25",
        "field_freqs": "0.02,0.05",
        "iris_contrast": 40.0,
        "field_contrast": 20.0,
        "color_contrast": "",
    },
    "learn-filters": {"k": 9, "n": 8, "seed": 0, "patches": 50000},
    "extract": {"region": "extended_ocular", "descriptor": "bsif", "bank": "", "window": 7, "cell": CELL_SIZE},
    "train": {
        "region": "extended_ocular",
        "descriptor": "bsif",
        "bank": "",
        "window": 7,
        "cell": CELL_SIZE,
        "C": 1.0,
        "tol": 1e-4,
        "max_iter": 10000,
        "svm_seed": 0,
    },
    "evaluate": {
        "region": "extended_ocular",
        "descriptor": "bsif",
        "bank": "",
        "window": 7,
        "cell": CELL_SIZE,
        "train_frac": 0.6,
        "reps": 5,
        "seed": 0,
        "C": 1.0,
        "tol": 1e-4,
        "max_iter": 10000,
        "svm_seed": 0,
    },
    "cross-eval": {"region": "extended_ocular", "descriptor": "bsif", "bank": "", "window": 7, "cell": CELL_SIZE},
    "subgroup-eval": {
        "region": "extended_ocular",
        "descriptor": "bsif",
        "bank": "",
        "window": 7,
        "cell": CELL_SIZE,
        "train_frac": 0.6,
        "reps": 5,
        "seed": 0,
        "C": 1.0,
        "tol": 1e-4,
        "max_iter": 10000,
        "svm_seed": 0,
    },
    "blur-eval": {
        "region": "extended_ocular",
        "descriptor": "bsif",
        "bank": "",
        "window": 7,
        "cell": CELL_SIZE,
        "train_frac": 0.6,
        "reps": 5,
        "seed": 0,
        "sigmas": "2,4,6,8,10",
        "C": 1.0,
        "tol": 1e-4,
        "max_iter": 10000,
        "svm_seed": 0,
    },
    "stratify": {"by": "eye_color"},
    "predict": {"out": "-"},
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="ocutex", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of flag values; explicit flags override")
        return p

    p = cmd("synth", "generate a synthetic labeled eye dataset")
    p.add_argument("--out", help="output directory for images, manifest.csv, ledger.csv")
    p.add_argument("--subjects-per-class", dest="subjects_per_class", type=int)
    p.add_argument("--images-per-subject", dest="images_per_subject", type=int)
    p.add_argument("--size", help="image size WxH")
    p.add_argument("--seed", type=int)
    p.add_argument("--iris-freqs", dest="iris_freqs", help="two cycles/pixel values: caucasian,non_caucasian")
    p.add_argument("--field-freqs", dest="field_freqs", help="two cycles/pixel values: female,male")
    p.add_argument("--iris-contrast", dest="iris_contrast", type=float)
    p.add_argument("--field-contrast", dest="field_contrast", type=float)
    p.add_argument("--color-contrast", dest="color_contrast", help="per-color multipliers, e.g. blue=0.2,brown=1")

    p = cmd("learn-filters", "learn a filter bank from PGM images")
    p.add_argument("--images", help="directory of PGM files or a manifest CSV")
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--patches", type=int)
    p.add_argument("--out", help="output bank file")

    def add_descriptor_flags(p):
        p.add_argument("--region", choices=[r.value for r in Region])
        p.add_argument("--descriptor", choices=["bsif", "lbp", "lpq"])
        p.add_argument("--bank", help="filter bank file (bsif); default is the shipped bank")
        p.add_argument("--window", type=int, help="lpq window size")
        p.add_argument("--cell", type=int, help="tessellation cell size")

    def add_svm_flags(p):
        p.add_argument("--C", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--svm-seed", dest="svm_seed", type=int)

    p = cmd("extract", "write per-image feature files")
    p.add_argument("--manifest")
    add_descriptor_flags(p)
    p.add_argument("--out", help="output directory")

    p = cmd("train", "train one model on every labeled image of a manifest")
    p.add_argument("--manifest")
    p.add_argument("--attribute", choices=sorted(ATTRIBUTE_CLASSES))
    add_descriptor_flags(p)
    add_svm_flags(p)
    p.add_argument("--out", help="output model file")

    p = cmd("evaluate", "balanced subject-disjoint repetitions with a report")
    p.add_argument("--manifest")
    p.add_argument("--attribute", choices=sorted(ATTRIBUTE_CLASSES))
    add_descriptor_flags(p)
    p.add_argument("--train-frac", dest="train_frac", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    add_svm_flags(p)
    p.add_argument("--out", help="output root; results land in <out>/evaluate-<hash>/")

    p = cmd("cross-eval", "score another manifest with previously trained models")
    p.add_argument("--models", help="evaluate output directory or glob of model files")
    p.add_argument("--manifest")
    add_descriptor_flags(p)
    p.add_argument("--out")

    p = cmd("subgroup-eval", "train on one filtered subgroup, test on another")
    p.add_argument("--manifest")
    p.add_argument("--attribute", choices=sorted(ATTRIBUTE_CLASSES))
    p.add_argument("--train-filter", dest="train_filter", help="field=value[,field=value]")
    p.add_argument("--test-filter", dest="test_filter", help="field=value[,field=value]")
    add_descriptor_flags(p)
    p.add_argument("--train-frac", dest="train_frac", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    add_svm_flags(p)
    p.add_argument("--out")

    p = cmd("blur-eval", "evaluate, then rescore blurred test images per sigma")
    p.add_argument("--manifest")
    p.add_argument("--attribute", choices=sorted(ATTRIBUTE_CLASSES))
    add_descriptor_flags(p)
    p.add_argument("--train-frac", dest="train_frac", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigmas", help="comma-separated positive blur sigmas")
    add_svm_flags(p)
    p.add_argument("--out")

    p = cmd("stratify", "per-value accuracy breakdown of an existing run")
    p.add_argument("--run", help="an evaluate output directory (reads predictions.csv)")
    p.add_argument("--manifest")
    p.add_argument("--by", help="manifest field, e.g. eye_color or sensor")
    p.add_argument("--out")

    p = cmd("predict", "score a manifest with one model file")
    p.add_argument("--model")
    p.add_argument("--manifest")
    p.add_argument("--bank", help="filter bank file when the model is not on the shipped bank")
    p.add_argument("--out", help="output CSV path, or - for stdout")

    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cmd = args.command
    resolved = dict(_DEFAULTS.get(cmd, {}))
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except FileNotFoundError:
            raise DataError(f"config file not found: {args.config}")
        except json.JSONDecodeError as err:
            raise DataError(f"config file {args.config} is not valid JSON: {err}")
        if not isinstance(loaded, dict):
            raise DataError(f"config file {args.config} must hold a JSON object")
        loaded.pop("command", None)
        loaded.pop("out", None)
        allowed = set(_DEFAULTS.get(cmd, {})) | _cli_only_keys(cmd)
        unknown = set(loaded) - allowed
        if unknown:
            raise DataError(f"config keys not valid for {cmd}: {sorted(unknown)}")
        resolved.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            resolved[key] = value
    return resolved


def _cli_only_keys(cmd: str) -> set[str]:
    # Flags without table defaults (required inputs) are still legal in configs.
    extra = {
        "synth": {"out"},
        "learn-filters": {"images", "out"},
        "extract": {"manifest", "out"},
        "train": {"manifest", "attribute", "out"},
        "evaluate": {"manifest", "attribute"},
        "cross-eval": {"models", "manifest"},
        "subgroup-eval": {"manifest", "attribute", "train_filter", "test_filter"},
        "blur-eval": {"manifest", "attribute"},
        "stratify": {"run", "manifest", "by"},
        "predict": {"model", "manifest", "bank"},
    }
    return extra.get(cmd, set())


def _require(cfg: dict, *keys: str):
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise UsageError("missing required flags: " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _config_hash(cmd: str, cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k != "out"}
    payload["command"] = cmd
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()
    return digest[:12]


def _experiment_dir(cmd: str, cfg: dict) -> str:
    _require(cfg, "out")
    out = os.path.join(cfg["out"], f"{cmd}-{_config_hash(cmd, cfg)}")
    if os.path.exists(out):
        raise DataError(
            f"output directory {out} already exists; experiment outputs are immutable"
        )
    os.makedirs(out)
    with open(os.path.join(out, "config.json"), "w") as fh:
        payload = {k: v for k, v in cfg.items() if k != "out"}
        payload["command"] = cmd
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return out


def _descriptor_from_cfg(cfg: dict):
    bank = None
    if cfg.get("descriptor") == "bsif":
        bank = load_bank(cfg["bank"]) if cfg.get("bank") else default_bank()
    return descriptor_from_name(cfg["descriptor"], bank=bank, window=int(cfg.get("window", 7)))


def _svm_from_cfg(cfg: dict) -> SvmConfig:
    return SvmConfig(
        C=float(cfg["C"]), tol=float(cfg["tol"]), max_iter=int(cfg["max_iter"]), seed=int(cfg["svm_seed"])
    )


def _parse_filter(text: str) -> dict:
    out = {}
    if not text:
        return out
    for part in text.split(","):
        if "=" not in part:
            raise UsageError(f"bad filter term {part!r}; expected field=value")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _write_report_files(out: str, report, entries, models=(), dropped=()):
    import csv

    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(format_report(report))
    with open(os.path.join(out, "report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("metric", "value"))
        writer.writerows(report_csv_rows(report))
    save_prediction_log(os.path.join(out, "predictions.csv"), entries)
    for i, model in enumerate(models):
        save_model(os.path.join(out, f"model_rep{i}.svm"), model)
    if dropped:
        with open(os.path.join(out, "dropped.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("image_path", "reason"))
            writer.writerows(dropped)


# ---------------------------------------------------------------------------
# Subcommand bodies.


def _cmd_synth(cfg: dict) -> int:
    _require(cfg, "out")
    try:
        w, h = (int(v) for v in cfg["size"].lower().split("x"))
    except ValueError:
        raise UsageError(f"--size must look like 640x480, got {cfg['size']!r}")
    iris_f = [float(v) for v in str(cfg["iris_freqs"]).split(",")]
    field_f = [float(v) for v in str(cfg["field_freqs"]).split(",")]
    if len(iris_f) != 2 or len(field_f) != 2:
        raise UsageError("--iris-freqs and --field-freqs need exactly two values")
    color_contrast = {}
    if cfg["color_contrast"]:
        for key, value in _parse_filter(str(cfg["color_contrast"])).items():
            color_contrast[key] = float(value)
    manifest_path = os.path.join(cfg["out"], "manifest.csv")
    if os.path.exists(manifest_path):
        raise DataError(f"{manifest_path} already exists; refusing to overwrite a dataset")
    spec = SynthSpec(
        subjects_per_class=int(cfg["subjects_per_class"]),
        images_per_subject=int(cfg["images_per_subject"]),
        image_size=(w, h),
        iris_textures={
            "caucasian": TextureParams(iris_f[0], math.pi / 4, float(cfg["iris_contrast"])),
            "non_caucasian": TextureParams(iris_f[1], math.pi / 4, float(cfg["iris_contrast"])),
        },
        field_textures={
            "female": TextureParams(field_f[0], 0.0, float(cfg["field_contrast"])),
            "male": TextureParams(field_f[1], math.pi / 2, float(cfg["field_contrast"])),
        },
        eye_color_contrast=color_contrast,
        seed=int(cfg["seed"]),
    )
    manifest = generate(spec, cfg["out"])
    print(f"wrote {len(manifest)} images and manifest.csv under {cfg['out']}")
    return 0


def _cmd_learn_filters(cfg: dict) -> int:
    _require(cfg, "images", "out")
    if os.path.exists(cfg["out"]):
        raise DataError(f"{cfg['out']} already exists; refusing to overwrite")
    source = cfg["images"]
    if os.path.isdir(source):
        paths = sorted(glob.glob(os.path.join(source, "*.pgm")))
    else:
        paths = [r.image_path for r in load_manifest(source)]
    if not paths:
        raise DataError(f"no PGM images found under {source}")
    images = [load_pgm(p) for p in paths]
    bank = learn_filters(
        images, k=int(cfg["k"]), n=int(cfg["n"]), seed=int(cfg["seed"]), patch_count=int(cfg["patches"])
    )
    save_bank(cfg["out"], bank)
    print(f"learned {bank.n} filters of size {bank.k}x{bank.k} -> {cfg['out']} ({bank.tag})")
    return 0


def _cmd_extract(cfg: dict) -> int:
    _require(cfg, "manifest", "out")
    manifest = load_manifest(cfg["manifest"])
    missing = manifest.missing_files()
    if missing:
        raise DataError(
            "missing image files:\n" + "\n".join(f"  {p}" for p in missing)
        )
    descriptor = _descriptor_from_cfg(cfg)
    sel = Region(cfg["region"])
    os.makedirs(cfg["out"], exist_ok=True)
    import csv

    index_path = os.path.join(cfg["out"], "index.csv")
    if os.path.exists(index_path):
        raise DataError(f"{index_path} already exists; refusing to overwrite")
    rows = []
    n_dropped = 0
    for i, record in enumerate(manifest):
        img = load_pgm(record.image_path)
        try:
            fv = extract_features(img, record.geometry, sel, descriptor, cell=int(cfg["cell"]))
        except InsufficientBorder as err:
            rows.append((record.image_path, "", f"dropped: {err}"))
            n_dropped += 1
            continue
        name = f"{i:06d}.fvec"
        save_features(os.path.join(cfg["out"], name), fv)
        rows.append((record.image_path, name, ""))
    with open(index_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("image_path", "feature_file", "note"))
        writer.writerows(rows)
    print(f"extracted {len(rows) - n_dropped} feature files ({n_dropped} dropped) -> {cfg['out']}")
    return 0


def _cmd_train(cfg: dict) -> int:
    _require(cfg, "manifest", "attribute", "out")
    if os.path.exists(cfg["out"]):
        raise DataError(f"{cfg['out']} already exists; refusing to overwrite")
    manifest = load_manifest(cfg["manifest"])
    descriptor = _descriptor_from_cfg(cfg)
    sel = Region(cfg["region"])
    attribute = cfg["attribute"]
    records = [r for r in manifest if r.label(attribute) != "unknown"]
    if not records:
        raise DataError(f"no records with known {attribute}")
    feats = []
    labels = []
    for r in records:
        img = load_pgm(r.image_path)
        try:
            feats.append(extract_features(img, r.geometry, sel, descriptor, cell=int(cfg["cell"])))
        except InsufficientBorder:
            continue
        labels.append(r.label(attribute))
    model = train_svm(feats, labels, _svm_from_cfg(cfg))
    save_model(cfg["out"], model)
    print(
        f"trained on {len(labels)} images; duality gap {model.duality_gap:.3e} "
        f"after {model.epochs} epochs -> {cfg['out']}"
    )
    return 0


def _cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "manifest", "attribute")
    manifest = load_manifest(cfg["manifest"])
    descriptor = _descriptor_from_cfg(cfg)
    plan = make_splits(
        manifest, cfg["attribute"], float(cfg["train_frac"]), int(cfg["reps"]), int(cfg["seed"])
    )
    result = run_experiment(
        manifest, plan, Region(cfg["region"]), descriptor, cell=int(cfg["cell"]), svm=_svm_from_cfg(cfg)
    )
    out = _experiment_dir("evaluate", cfg)
    _write_report_files(out, result.report, result.entries, result.models, result.dropped)
    print(format_report(result.report), end="")
    print(f"results -> {out}")
    return 0


def _cmd_cross_eval(cfg: dict) -> int:
    _require(cfg, "models", "manifest")
    pattern = cfg["models"]
    if os.path.isdir(pattern):
        paths = sorted(glob.glob(os.path.join(pattern, "model_rep*.svm")))
    else:
        paths = sorted(glob.glob(pattern))
    if not paths:
        raise DataError(f"no model files match {pattern}")
    models = [load_model(p) for p in paths]
    manifest = load_manifest(cfg["manifest"])
    descriptor = _descriptor_from_cfg(cfg)
    result = cross_dataset_eval(
        models, manifest, Region(cfg["region"]), descriptor, cell=int(cfg["cell"])
    )
    out = _experiment_dir("cross-eval", cfg)
    _write_report_files(out, result.report, result.entries, dropped=result.dropped)
    print(format_report(result.report), end="")
    print(f"results -> {out}")
    return 0


def _cmd_subgroup_eval(cfg: dict) -> int:
    _require(cfg, "manifest", "attribute", "train_filter", "test_filter")
    manifest = load_manifest(cfg["manifest"])
    descriptor = _descriptor_from_cfg(cfg)
    result = subgroup_experiment(
        manifest,
        cfg["attribute"],
        _parse_filter(str(cfg["train_filter"])),
        _parse_filter(str(cfg["test_filter"])),
        Region(cfg["region"]),
        descriptor,
        train_frac=float(cfg["train_frac"]),
        reps=int(cfg["reps"]),
        seed=int(cfg["seed"]),
        cell=int(cfg["cell"]),
        svm=_svm_from_cfg(cfg),
    )
    out = _experiment_dir("subgroup-eval", cfg)
    _write_report_files(out, result.report, result.entries, result.models, result.dropped)
    print(format_report(result.report), end="")
    print(f"results -> {out}")
    return 0


def _cmd_blur_eval(cfg: dict) -> int:
    _require(cfg, "manifest", "attribute")
    manifest = load_manifest(cfg["manifest"])
    descriptor = _descriptor_from_cfg(cfg)
    sigmas = tuple(float(v) for v in str(cfg["sigmas"]).split(",") if v)
    plan = make_splits(
        manifest, cfg["attribute"], float(cfg["train_frac"]), int(cfg["reps"]), int(cfg["seed"])
    )
    sweep = blur_experiment(
        manifest, plan, Region(cfg["region"]), descriptor, sigmas, cell=int(cfg["cell"]), svm=_svm_from_cfg(cfg)
    )
    out = _experiment_dir("blur-eval", cfg)
    _write_report_files(
        out, sweep.baseline.report, sweep.baseline.entries, sweep.baseline.models, sweep.baseline.dropped
    )
    import csv

    for sigma in sorted(sweep.reports):
        tag = f"{sigma:g}".replace(".", "p")
        with open(os.path.join(out, f"report_sigma_{tag}.txt"), "w") as fh:
            fh.write(format_report(sweep.reports[sigma]))
        with open(os.path.join(out, f"report_sigma_{tag}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("metric", "value"))
            writer.writerows(report_csv_rows(sweep.reports[sigma]))
        save_prediction_log(os.path.join(out, f"predictions_sigma_{tag}.csv"), sweep.entries[sigma])
    with open(os.path.join(out, "blur_table.txt"), "w") as fh:
        fh.write(format_blur_table(sweep.reports))
    print(format_blur_table(sweep.reports), end="")
    print(f"results -> {out}")
    return 0


def _cmd_stratify(cfg: dict) -> int:
    _require(cfg, "run", "manifest", "by")
    log_path = os.path.join(cfg["run"], "predictions.csv")
    if not os.path.isfile(log_path):
        raise DataError(f"no predictions.csv under {cfg['run']}")
    entries = load_prediction_log(log_path)
    manifest = load_manifest(cfg["manifest"])
    if cfg["by"] not in ("subject_id", "eye", "sensor", "gender", "race", "eye_color"):
        raise UsageError(f"cannot stratify by {cfg['by']!r}")
    sr = stratified_report(entries, manifest, cfg["by"])
    out = _experiment_dir("stratify", cfg)
    with open(os.path.join(out, "strata.txt"), "w") as fh:
        fh.write(format_strata(sr))
    import csv

    with open(os.path.join(out, "strata.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("value", "n_images", "reps_with_data", "mean_accuracy", "std_accuracy"))
        for s in sr.strata:
            writer.writerow((s.value, s.n_images, s.reps_with_data, repr(s.mean_accuracy), repr(s.std_accuracy)))
        for value in sr.omitted:
            writer.writerow((value, 0, 0, "", ""))
    print(format_strata(sr), end="")
    print(f"results -> {out}")
    return 0


def _cmd_predict(cfg: dict) -> int:
    _require(cfg, "model", "manifest")
    model = load_model(cfg["model"])
    manifest = load_manifest(cfg["manifest"])
    try:
        tag, region_name, cell_part, _dim = model.fingerprint.split("|")
        cell = int(cell_part.removeprefix("cell"))
    except ValueError:
        raise DataError(f"model fingerprint {model.fingerprint!r} is not parseable")
    if tag.startswith("bsif-"):
        bank = load_bank(cfg["bank"]) if cfg.get("bank") else default_bank()
        descriptor = descriptor_from_name("bsif", bank=bank)
    elif tag.startswith("lpq-w"):
        descriptor = descriptor_from_name("lpq", window=int(tag.removeprefix("lpq-w")))
    else:
        descriptor = descriptor_from_name("lbp")
    if descriptor.tag != tag:
        raise DataError(
            f"model was trained with descriptor {tag!r} but extraction would use "
            f"{descriptor.tag!r}; pass the matching --bank"
        )
    sel = Region(region_name)
    lines = [("image_path", "predicted_label", "decision_value")]
    for record in manifest:
        img = load_pgm(record.image_path)
        try:
            fv = extract_features(img, record.geometry, sel, descriptor, cell=cell)
        except InsufficientBorder as err:
            raise DataError(f"{record.image_path}: {err}")
        value = decision_value(model, fv)
        lines.append((record.image_path, model.label_map[1 if value >= 0 else -1], repr(value)))
    import csv

    if cfg["out"] == "-":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerows(lines)
    else:
        if os.path.exists(cfg["out"]):
            raise DataError(f"{cfg['out']} already exists; refusing to overwrite")
        with open(cfg["out"], "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(lines)
        print(f"wrote predictions for {len(lines) - 1} images -> {cfg['out']}")
    return 0


_HANDLERS = {
    "synth": _cmd_synth,
    "learn-filters": _cmd_learn_filters,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "cross-eval": _cmd_cross_eval,
    "subgroup-eval": _cmd_subgroup_eval,
    "blur-eval": _cmd_blur_eval,
    "stratify": _cmd_stratify,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _resolve(args)
        return _HANDLERS[args.command](cfg)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (DataError, ManifestError, PgmFormatError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except (IcaConvergenceError, np.linalg.LinAlgError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except ValueError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
