"""Manifest parsing, validation, filtering, and the canonical writer."""

import pytest

from ocutex.dataset import (
    DatasetManifest,
    ManifestError,
    filter_records,
    load_manifest,
    save_manifest,
)

_HEADER = "image_path,subject_id,eye,sensor,gender,race,eye_color,iris_x,iris_y,iris_r"


def _write(tmp_path, rows, name="m.csv"):
    f = tmp_path / name
    f.write_text("\n".join([_HEADER] + rows) + "\n")
    return f


_ROWS = [
    "img/a1.pgm,s1,L,sensorA,female,caucasian,blue,320,240,60",
    "img/a2.pgm,s1,R,sensorA,female,caucasian,blue,321,239,61",
    "img/b1.pgm,s2,L,sensorB,male,non_caucasian,brown,318,242,58",
]


def test_three_row_manifest(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    assert len(m) == 3
    assert m.subjects() == {"s1", "s2"}
    rec = m.records[0]
    assert rec.subject_id == "s1"
    assert rec.eye == "L"
    assert rec.gender == "female"
    assert rec.geometry.center_x == 320
    assert rec.geometry.radius == 60
    # Relative paths resolve against the manifest directory.
    assert rec.image_path == str(tmp_path / "img" / "a1.pgm")


def test_bad_eye_names_row_and_column(tmp_path):
    rows = [_ROWS[0], _ROWS[1].replace(",R,", ",X,")]
    with pytest.raises(ManifestError, match="row 3") as exc:
        load_manifest(_write(tmp_path, rows))
    assert "eye" in str(exc.value)


def test_duplicate_path_lists_both_rows(tmp_path):
    rows = [_ROWS[0], _ROWS[1], _ROWS[0]]
    with pytest.raises(ManifestError, match="row 4") as exc:
        load_manifest(_write(tmp_path, rows))
    assert "row 2" in str(exc.value)
    assert "duplicate" in str(exc.value)


def test_header_must_match_exactly(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("image_path,subject,eye\n")
    with pytest.raises(ManifestError, match="row 1"):
        load_manifest(f)


def test_empty_file_rejected(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("")
    with pytest.raises(ManifestError, match="row 1"):
        load_manifest(f)


def test_bad_enum_values(tmp_path):
    cases = [
        _ROWS[0].replace("female", "F"),
        _ROWS[0].replace("caucasian,blue", "martian,blue"),
        _ROWS[0].replace("blue", "purple"),
    ]
    for row in cases:
        with pytest.raises(ManifestError, match="row 2"):
            load_manifest(_write(tmp_path, [row]))


def test_bad_geometry(tmp_path):
    with pytest.raises(ManifestError, match="numeric"):
        load_manifest(_write(tmp_path, [_ROWS[0].replace(",60", ",wide")]))
    with pytest.raises(ManifestError, match="positive"):
        load_manifest(_write(tmp_path, [_ROWS[0].replace(",60", ",0")]))


def test_missing_value(tmp_path):
    with pytest.raises(ManifestError, match="missing value"):
        load_manifest(_write(tmp_path, [_ROWS[0].replace("sensorA", "")]))


def test_wrong_field_count(tmp_path):
    with pytest.raises(ManifestError, match="expected 10 fields"):
        load_manifest(_write(tmp_path, [_ROWS[0] + ",extra"]))


def test_unknown_labels_are_legal(tmp_path):
    row = "img/u.pgm,s9,L,sensorA,unknown,unknown,unknown,320,240,60"
    m = load_manifest(_write(tmp_path, [row]))
    assert m.records[0].gender == "unknown"


def test_load_save_identity(tmp_path):
    src = _write(tmp_path, _ROWS)
    m = load_manifest(src)
    out = tmp_path / "copy.csv"
    save_manifest(out, m)
    again = load_manifest(out)
    assert again.records == m.records
    # The canonical writer is a fixed point.
    out2 = tmp_path / "copy2.csv"
    save_manifest(out2, again)
    assert out.read_text() == out2.read_text()


def test_save_relativizes_paths(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    out = tmp_path / "saved.csv"
    save_manifest(out, m)
    text = out.read_text()
    assert "img/a1.pgm" in text.replace("\\", "/")
    assert str(tmp_path) not in text


def test_fractional_geometry_round_trips(tmp_path):
    row = "img/f.pgm,s3,R,sensorA,male,caucasian,green,320.25,239.5,59.75"
    m = load_manifest(_write(tmp_path, [row]))
    out = tmp_path / "o.csv"
    save_manifest(out, m)
    back = load_manifest(out)
    assert back.records[0].geometry == m.records[0].geometry
    assert "320.25" in out.read_text()


def test_filter_by_field(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    left = filter_records(m, eye="L")
    assert [r.image_path for r in left] == [m.records[0].image_path, m.records[2].image_path]
    # Contradictory filters compose to empty.
    assert len(filter_records(filter_records(m, gender="male"), gender="female")) == 0


def test_filter_is_idempotent_and_commutative(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    a = filter_records(filter_records(m, eye="L"), eye="L")
    assert a == filter_records(m, eye="L")
    ab = filter_records(filter_records(m, eye="L"), gender="female")
    ba = filter_records(filter_records(m, gender="female"), eye="L")
    assert ab == ba


def test_filter_with_predicate(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    big = filter_records(m, pred=lambda r: r.geometry.radius >= 60)
    assert len(big) == 2


def test_filter_rejects_non_label_fields(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    with pytest.raises(ValueError, match="filter"):
        filter_records(m, iris_r="60")


def test_counting_helpers(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    assert m.count_by("gender") == {"female": 2, "male": 1}
    assert m.subjects_by("gender") == {"female": {"s1"}, "male": {"s2"}}
    assert DatasetManifest(()).subjects() == set()


def test_label_accessor(tmp_path):
    m = load_manifest(_write(tmp_path, _ROWS))
    assert m.records[0].label("gender") == "female"
    assert m.records[2].label("race") == "non_caucasian"
    with pytest.raises(ValueError):
        m.records[0].label("eye_color")
