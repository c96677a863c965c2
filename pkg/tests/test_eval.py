"""Experiment protocol tests: splits, reports, cross-dataset scoring,
subgroup and blur runs, stratified breakdowns, prediction logs."""

import math

import numpy as np
import pytest

from ocutex.align import AlignParams, OcularGeometry, Region
from ocutex.dataset import DatasetManifest, SampleRecord
from ocutex.descriptors import Lbp
from ocutex.experiments import (
    EvalReport,
    PredictionEntry,
    blur_experiment,
    cross_dataset_eval,
    format_blur_table,
    format_report,
    format_strata,
    load_prediction_log,
    make_splits,
    report_csv_rows,
    report_from_entries,
    run_experiment,
    save_prediction_log,
    stratified_report,
    subgroup_experiment,
)
from ocutex.features import FeatureVector, extract_features
from ocutex.image import load_pgm, write_pgm
from ocutex.svm import SvmConfig, decision_value, train_svm

GEO = OcularGeometry(60.0, 50.0, 20.0)


def _record(subject, gender="female", race="caucasian", path=None, eye="L",
            eye_color="brown", sensor="rig0"):
    return SampleRecord(
        image_path=path or f"/nowhere/{subject}.pgm",
        subject_id=subject,
        eye=eye,
        sensor=sensor,
        gender=gender,
        race=race,
        eye_color=eye_color,
        geometry=GEO,
    )


def _split_manifest(n_female, n_male, images_per_subject=1):
    recs = []
    for gender, prefix, count in (("female", "f", n_female), ("male", "m", n_male)):
        for s in range(count):
            for k in range(images_per_subject):
                recs.append(
                    _record(f"{prefix}{s:04d}", gender=gender,
                            path=f"/nowhere/{prefix}{s:04d}_{k}.pgm")
                )
    return DatasetManifest(tuple(recs))


def _class_subjects(manifest, attribute, value):
    return {r.subject_id for r in manifest if r.label(attribute) == value}


# ---------------------------------------------------------------------------
# Split construction.


def test_split_sizes_and_disjointness():
    m = _split_manifest(100, 100)
    plan = make_splits(m, "gender", train_frac=0.6, reps=5, seed=0)
    females = _class_subjects(m, "gender", "female")
    males = _class_subjects(m, "gender", "male")
    assert len(plan.repetitions) == 5
    assert plan.excluded_unknown == 0
    for rep in plan.repetitions:
        assert not (rep.train_subjects & rep.test_subjects)
        assert len(rep.train_subjects & females) == 60
        assert len(rep.train_subjects & males) == 60
        assert len(rep.test_subjects & females) == 40
        assert len(rep.test_subjects & males) == 40
        assert rep.train_subjects | rep.test_subjects == females | males


def test_majority_class_is_subsampled_to_minority():
    # 849 vs 247 subjects: the majority is cut to 247, then each
    # repetition trains on floor(0.6 * 247) = 148 and tests on 99.
    m = _split_manifest(849, 247)
    plan = make_splits(m, "gender", train_frac=0.6, reps=5, seed=0)
    females = _class_subjects(m, "gender", "female")
    males = _class_subjects(m, "gender", "male")
    pools = []
    for rep in plan.repetitions:
        used_f = (rep.train_subjects | rep.test_subjects) & females
        used_m = (rep.train_subjects | rep.test_subjects) & males
        assert len(used_f) == 247
        assert used_m == males
        assert len(rep.train_subjects & females) == 148
        assert len(rep.test_subjects & females) == 99
        assert len(rep.train_subjects & males) == 148
        assert len(rep.test_subjects & males) == 99
        pools.append(used_f)
    # The subsample is drawn once; repetitions reshuffle the same pool.
    assert all(p == pools[0] for p in pools)


def test_splits_deterministic_per_seed():
    m = _split_manifest(100, 100)
    assert make_splits(m, "gender", seed=7) == make_splits(m, "gender", seed=7)
    a = make_splits(m, "gender", seed=0)
    b = make_splits(m, "gender", seed=1)
    assert any(
        ra.train_subjects != rb.train_subjects
        for ra, rb in zip(a.repetitions, b.repetitions)
    )


def test_unknown_labels_are_excluded_and_counted():
    recs = list(_split_manifest(5, 5))
    # One subject entirely unknown, one with a second unknown-labeled image.
    recs.append(_record("u0", gender="unknown", path="/nowhere/u0_0.pgm"))
    recs.append(_record("u0", gender="unknown", path="/nowhere/u0_1.pgm"))
    recs.append(_record("f0000", gender="unknown", path="/nowhere/f0000_x.pgm"))
    m = DatasetManifest(tuple(recs))
    plan = make_splits(m, "gender", train_frac=0.6, reps=3, seed=0)
    assert plan.excluded_unknown == 3
    for rep in plan.repetitions:
        used = rep.train_subjects | rep.test_subjects
        assert "u0" not in used
        assert "f0000" in used  # still has a known-label image


def test_conflicting_subject_labels_rejected():
    recs = [
        _record("s1", gender="female", path="/nowhere/a.pgm"),
        _record("s1", gender="male", path="/nowhere/b.pgm"),
        _record("s2", gender="male", path="/nowhere/c.pgm"),
    ]
    with pytest.raises(ValueError, match="conflicting"):
        make_splits(DatasetManifest(tuple(recs)), "gender")


def test_split_validation_errors():
    m = _split_manifest(5, 5)
    with pytest.raises(ValueError, match="unknown attribute"):
        make_splits(m, "eye_color")
    with pytest.raises(ValueError, match="train_frac"):
        make_splits(m, "gender", train_frac=1.0)
    with pytest.raises(ValueError, match="train_frac"):
        make_splits(m, "gender", train_frac=0.0)
    with pytest.raises(ValueError, match="reps"):
        make_splits(m, "gender", reps=0)
    with pytest.raises(ValueError, match="no subjects"):
        make_splits(_split_manifest(5, 0), "gender")
    # One subject per class cannot produce a non-empty train and test side.
    with pytest.raises(ValueError, match="no usable split"):
        make_splits(_split_manifest(1, 1), "gender", train_frac=0.6)


# ---------------------------------------------------------------------------
# Report reduction from a prediction log (hand-computed expectations).


def _entry(path, rep, true, pred, value=1.0):
    return PredictionEntry(path, rep, true, pred, value)


def test_report_from_entries_hand_check():
    entries = [
        _entry("a", 0, "female", "female"),
        _entry("b", 0, "female", "male"),
        _entry("c", 0, "male", "male"),
        _entry("d", 0, "male", "male"),
        _entry("e", 1, "female", "female"),
        _entry("f", 1, "male", "female"),
    ]
    rep = report_from_entries(entries, "gender", n_dropped=2)
    assert rep.per_rep_accuracy == (75.0, 50.0)
    assert rep.mean_accuracy == 62.5
    assert rep.std_accuracy == 12.5
    assert rep.n_entries == 6
    assert rep.n_dropped == 2
    assert rep.confusion["female"]["female"] == (75.0, 25.0)
    assert rep.confusion["female"]["male"] == (25.0, 25.0)
    assert rep.confusion["male"]["female"] == (50.0, 50.0)
    assert rep.confusion["male"]["male"] == (50.0, 50.0)
    for t in rep.classes:
        row = sum(rep.confusion[t][p][0] for p in rep.classes)
        assert abs(row - 100.0) < 0.01


def test_report_from_empty_log_rejected():
    with pytest.raises(ValueError, match="empty"):
        report_from_entries([], "gender")


def test_prediction_log_round_trip(tmp_path):
    entries = (
        _entry("x/one.pgm", 0, "female", "male", -0.125),
        _entry("x/two.pgm", 1, "male", "male", 3.0000000000000004),
    )
    path = tmp_path / "log.csv"
    save_prediction_log(path, entries)
    text = path.read_text()
    assert text.splitlines()[0] == (
        "image_path,repetition,true_label,predicted_label,decision_value"
    )
    loaded = load_prediction_log(path)
    assert loaded == entries  # repr round-trip keeps decision values exact
    bad = tmp_path / "bad.csv"
    bad.write_text("image,rep\nx,0\n")
    with pytest.raises(ValueError, match="header"):
        load_prediction_log(bad)


# ---------------------------------------------------------------------------
# End-to-end experiments on a small synthetic image set.  Gender controls
# the stripe orientation, so the task is separable by texture direction.

PARAMS = AlignParams(out_w=100, out_h=80, canonical_radius=20.0)
DESCRIPTOR = Lbp()


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    root = tmp_path_factory.mktemp("tinyset")
    rng_id = 0
    recs = []
    yy, xx = np.mgrid[0:100, 0:120]
    for gender, prefix, vertical in (("female", "f", False), ("male", "m", True)):
        for s in range(1, 7):
            subject = f"{prefix}{s}"
            race = "caucasian" if s <= 3 else "non_caucasian"
            color = "blue" if subject in ("f1", "m4") else "brown"
            for shot in range(2):
                rng = np.random.default_rng(4200 + rng_id)
                rng_id += 1
                phase = xx if vertical else yy
                img = 128.0 + 90.0 * np.sign(np.sin(phase * (2 * np.pi / 6.0)))
                img = img + rng.normal(0.0, 8.0, size=img.shape)
                img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
                path = str(root / f"{subject}_{shot}.pgm")
                write_pgm(path, img)
                recs.append(
                    _record(
                        subject,
                        gender=gender,
                        race=race,
                        path=path,
                        eye="L" if shot == 0 else "R",
                        eye_color=color,
                    )
                )
    return DatasetManifest(tuple(recs))


@pytest.fixture(scope="module")
def gender_run(tiny):
    plan = make_splits(tiny, "gender", train_frac=0.6, reps=3, seed=1)
    result = run_experiment(tiny, plan, Region.EXTENDED_OCULAR, DESCRIPTOR, params=PARAMS)
    return plan, result


def test_run_experiment_scores_exactly_the_test_images(tiny, gender_run):
    plan, result = gender_run
    by_path = {r.image_path: r for r in tiny}
    for rep in plan.repetitions:
        scored = [e for e in result.entries if e.repetition == rep.index]
        expected = {
            r.image_path for r in tiny if r.subject_id in rep.test_subjects
        }
        assert {e.image_path for e in scored} == expected
        assert {by_path[e.image_path].subject_id for e in scored} == rep.test_subjects
        # No scored image belongs to a training subject of the same repetition.
        assert not {
            by_path[e.image_path].subject_id for e in scored
        } & rep.train_subjects
        for e in scored:
            assert e.true_label == by_path[e.image_path].gender
    assert len(result.models) == 3
    assert len({m.fingerprint for m in result.models}) == 1
    assert result.dropped == ()


def test_run_experiment_report_matches_its_own_log(gender_run):
    plan, result = gender_run
    acc = np.asarray(result.report.per_rep_accuracy)
    assert result.report.mean_accuracy == float(acc.mean())
    assert result.report.std_accuracy == float(acc.std())
    assert result.report.n_entries == len(result.entries)
    for t in result.report.classes:
        row = sum(result.report.confusion[t][p][0] for p in result.report.classes)
        assert abs(row - 100.0) < 0.01
    rebuilt = report_from_entries(result.entries, plan.attribute, n_dropped=0)
    assert rebuilt == result.report
    # Stripe orientation is an easy texture cue; the task should be learnable.
    assert result.report.mean_accuracy >= 90.0


def test_run_experiment_deterministic(tiny, gender_run):
    plan, result = gender_run
    again = run_experiment(tiny, plan, Region.EXTENDED_OCULAR, DESCRIPTOR, params=PARAMS)
    assert again.report == result.report
    assert again.entries == result.entries


def test_report_rederivable_from_saved_log(tmp_path, gender_run):
    plan, result = gender_run
    path = tmp_path / "predictions.csv"
    save_prediction_log(path, result.entries)
    assert report_from_entries(load_prediction_log(path), plan.attribute) == (
        report_from_entries(result.entries, plan.attribute)
    )


# ---------------------------------------------------------------------------
# Cross-dataset scoring.


def test_cross_dataset_self_consistency(tiny, gender_run):
    plan, result = gender_run
    cross = cross_dataset_eval(
        result.models, tiny, Region.EXTENDED_OCULAR, DESCRIPTOR, params=PARAMS
    )
    assert cross.report.attribute == "gender"  # inferred from label names
    assert cross.report.n_entries == len(result.models) * len(tiny)
    # Each model acts as one repetition over all images; per-model accuracy
    # recomputed by hand from decision values must match the report.
    features = {
        r.image_path: extract_features(
            load_pgm(r.image_path), r.geometry, Region.EXTENDED_OCULAR,
            DESCRIPTOR, PARAMS,
        )
        for r in tiny
    }
    for i, model in enumerate(result.models):
        correct = 0
        for r in tiny:
            value = decision_value(model, features[r.image_path])
            pred = model.label_map[1 if value >= 0 else -1]
            correct += pred == r.gender
        expected = 100.0 * correct / len(tiny)
        assert cross.report.per_rep_accuracy[i] == pytest.approx(expected, abs=1e-12)


def _toy_model(tag, labels=("female", "male")):
    fvs = [
        FeatureVector(tag, "extended_ocular", np.array([1.0, 0.0, 0.0, 0.0])),
        FeatureVector(tag, "extended_ocular", np.array([0.9, 0.1, 0.0, 0.0])),
        FeatureVector(tag, "extended_ocular", np.array([0.0, 1.0, 0.0, 0.0])),
        FeatureVector(tag, "extended_ocular", np.array([0.1, 0.9, 0.0, 0.0])),
    ]
    ys = [labels[0], labels[0], labels[1], labels[1]]
    return train_svm(fvs, ys, SvmConfig(seed=3))


def test_cross_dataset_rejects_mismatched_models(tiny):
    a = _toy_model("desc-a|extended_ocular|cell20|dim4")
    b = _toy_model("desc-b|extended_ocular|cell20|dim4")
    with pytest.raises(ValueError, match="fingerprint"):
        cross_dataset_eval([a, b], tiny, Region.EXTENDED_OCULAR, DESCRIPTOR)
    with pytest.raises(ValueError, match="at least one"):
        cross_dataset_eval([], tiny, Region.EXTENDED_OCULAR, DESCRIPTOR)


def test_cross_dataset_needs_inferable_attribute(tiny):
    odd = _toy_model("desc-a|extended_ocular|cell20|dim4", labels=("alpha", "beta"))
    with pytest.raises(ValueError, match="infer"):
        cross_dataset_eval([odd], tiny, Region.EXTENDED_OCULAR, DESCRIPTOR)


# ---------------------------------------------------------------------------
# Subgroup experiments.


def test_subgroup_same_filter_uses_held_out_subjects(tiny):
    result = subgroup_experiment(
        tiny,
        "gender",
        {"race": "caucasian"},
        {"race": "caucasian"},
        Region.EXTENDED_OCULAR,
        DESCRIPTOR,
        reps=3,
        seed=2,
        params=PARAMS,
    )
    caucasian = _class_subjects(tiny, "race", "caucasian")
    by_path = {r.image_path: r for r in tiny}
    for rep in result.plan.repetitions:
        scored = {
            by_path[e.image_path].subject_id
            for e in result.entries
            if e.repetition == rep.index
        }
        assert scored == rep.test_subjects
        assert scored <= caucasian
        assert not scored & rep.train_subjects


def test_subgroup_disjoint_filters_score_full_subgroup(tiny):
    result = subgroup_experiment(
        tiny,
        "gender",
        {"race": "caucasian"},
        {"race": "non_caucasian"},
        Region.EXTENDED_OCULAR,
        DESCRIPTOR,
        reps=2,
        seed=2,
        params=PARAMS,
    )
    other_images = {r.image_path for r in tiny if r.race == "non_caucasian"}
    for rep in result.plan.repetitions:
        scored = {
            e.image_path for e in result.entries if e.repetition == rep.index
        }
        assert scored == other_images
    assert len(result.entries) == 2 * len(other_images)


def test_subgroup_overlapping_filters_never_leak_train_subjects(tiny):
    result = subgroup_experiment(
        tiny,
        "gender",
        {"race": "caucasian"},
        {},  # test side: everyone, overlapping the train subgroup
        Region.EXTENDED_OCULAR,
        DESCRIPTOR,
        reps=2,
        seed=5,
        params=PARAMS,
    )
    everyone = tiny.subjects()
    by_path = {r.image_path: r for r in tiny}
    for rep in result.plan.repetitions:
        scored = {
            by_path[e.image_path].subject_id
            for e in result.entries
            if e.repetition == rep.index
        }
        assert scored == everyone - rep.train_subjects


def test_subgroup_filter_errors(tiny):
    with pytest.raises(ValueError, match="matches no records"):
        subgroup_experiment(
            tiny, "gender", {"sensor": "nope"}, {}, Region.EXTENDED_OCULAR,
            DESCRIPTOR, params=PARAMS,
        )
    # A train subgroup holding a single class cannot define the task.
    with pytest.raises(ValueError, match="no subjects"):
        subgroup_experiment(
            tiny, "gender", {"gender": "male"}, {}, Region.EXTENDED_OCULAR,
            DESCRIPTOR, params=PARAMS,
        )


# ---------------------------------------------------------------------------
# Blur sweeps.


def test_blur_zero_sigma_entry_is_the_exact_baseline(tiny):
    plan = make_splits(tiny, "gender", train_frac=0.6, reps=2, seed=3)
    sweep = blur_experiment(
        tiny, plan, Region.EXTENDED_OCULAR, DESCRIPTOR, sigmas=(1.5,), params=PARAMS
    )
    base = run_experiment(tiny, plan, Region.EXTENDED_OCULAR, DESCRIPTOR, params=PARAMS)
    assert sweep.reports[0.0] == base.report
    assert sweep.entries[0.0] == base.entries
    assert set(sweep.reports) == {0.0, 1.5}
    # Same images scored at every level; only the pixels differ.
    base_paths = {
        rep: {e.image_path for e in base.entries if e.repetition == rep}
        for rep in range(2)
    }
    for rep in range(2):
        blurred = {
            e.image_path for e in sweep.entries[1.5] if e.repetition == rep
        }
        assert blurred == base_paths[rep]
    # The models are trained once, on unblurred images.
    assert sweep.baseline.report == base.report
    values_base = {(e.image_path, e.repetition): e.decision_value for e in base.entries}
    changed = [
        e for e in sweep.entries[1.5]
        if values_base[(e.image_path, e.repetition)] != e.decision_value
    ]
    assert changed  # blurring must actually reach the test features


def test_blur_requires_positive_sigmas(tiny):
    plan = make_splits(tiny, "gender", reps=2, seed=3)
    for bad in ((0.0,), (2.0, -1.0)):
        with pytest.raises(ValueError, match="positive"):
            blur_experiment(
                tiny, plan, Region.EXTENDED_OCULAR, DESCRIPTOR, sigmas=bad,
                params=PARAMS,
            )


# ---------------------------------------------------------------------------
# Stratified breakdowns.


def test_stratified_counts_cover_the_log(tiny, gender_run):
    plan, result = gender_run
    sr = stratified_report(result.entries, tiny, "eye")
    assert sr.by == "eye"
    assert {s.value for s in sr.strata} == {"L", "R"}
    assert sum(s.n_images for s in sr.strata) == len(result.entries)
    lookup = {r.image_path: r.eye for r in tiny}
    for s in sr.strata:
        assert s.n_images == sum(1 for e in result.entries if lookup[e.image_path] == s.value)
        assert s.reps_with_data == len(s.per_rep_accuracy)
        assert s.reps_with_data <= len(plan.repetitions)
        acc = np.asarray(s.per_rep_accuracy)
        assert s.mean_accuracy == float(acc.mean())
        assert s.std_accuracy == float(acc.std())
    # Per repetition, strata partition that repetition's scored images.
    for rep in range(len(plan.repetitions)):
        total = sum(1 for e in result.entries if e.repetition == rep)
        by_value = sum(
            sum(
                1
                for e in result.entries
                if e.repetition == rep and lookup[e.image_path] == s.value
            )
            for s in sr.strata
        )
        assert by_value == total


def test_stratified_omits_values_without_test_images(tiny, gender_run):
    _, result = gender_run
    lookup = {r.image_path: r.eye_color for r in tiny}
    brown_only = [e for e in result.entries if lookup[e.image_path] == "brown"]
    sr = stratified_report(brown_only, tiny, "eye_color")
    assert [s.value for s in sr.strata] == ["brown"]
    assert sr.omitted == ("blue",)
    text = format_strata(sr)
    assert "blue: omitted (zero test images)" in text
    assert "brown: mean" in text


# ---------------------------------------------------------------------------
# Rendering.


def test_format_report_is_deterministic_and_labeled(gender_run):
    _, result = gender_run
    text = format_report(result.report)
    assert text == format_report(result.report)
    assert "population over repetitions" in text
    assert f"accuracy mean (%): {result.report.mean_accuracy:.2f}" in text
    assert "confusion (row-normalized %" in text
    rows = report_csv_rows(result.report)
    keys = [k for k, _ in rows]
    assert keys[0] == "attribute"
    assert len(keys) == len(set(keys))
    got = dict(rows)
    assert float(got["accuracy_mean"]) == result.report.mean_accuracy
    assert float(got["accuracy_std"]) == result.report.std_accuracy


def test_format_blur_table_sorted_by_sigma():
    rep = EvalReport(
        attribute="gender",
        classes=("female", "male"),
        per_rep_accuracy=(80.0,),
        mean_accuracy=80.0,
        std_accuracy=0.0,
        confusion={},
        n_entries=10,
        n_dropped=0,
    )
    rep2 = EvalReport(
        attribute="gender",
        classes=("female", "male"),
        per_rep_accuracy=(60.0,),
        mean_accuracy=60.0,
        std_accuracy=0.0,
        confusion={},
        n_entries=10,
        n_dropped=0,
    )
    text = format_blur_table({4.0: rep2, 0.0: rep})
    lines = text.splitlines()
    assert lines[0].split() == ["sigma", "accuracy_mean", "accuracy_std"]
    assert lines[1].startswith("0")
    assert lines[2].startswith("4")
    assert "80.00" in lines[1] and "60.00" in lines[2]


def test_nan_confusion_rows_render_as_dashes():
    # A log that never contains one true class leaves that row undefined.
    entries = [
        _entry("a", 0, "female", "female"),
        _entry("b", 0, "female", "male"),
    ]
    rep = report_from_entries(entries, "gender")
    assert math.isnan(rep.confusion["male"]["male"][0])
    text = format_report(rep)
    assert "true male: predicted female: - | predicted male: -" in text
