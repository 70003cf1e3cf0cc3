import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poremine.errors import DuplicateLabel, InvalidLabelValue, UnknownPoreId
from poremine.filtering import (
    Label,
    PoreRecord,
    apply_lower_cutoff,
    join_labels,
    parse_labels,
    read_labels,
)
from poremine.morphology import PoreFeatures
from poremine.tables import features_csv, parse_features_csv


def rec(area, pid=1, image="img1"):
    return PoreRecord(image, pid, PoreFeatures(area, 3.0, 2.0, 1.0, 10.0, 0.8, 2.0, 0.5, 0.9))


def test_cutoff_boundary_inclusive():
    ds = apply_lower_cutoff([rec(0.39, 1), rec(0.40, 2)], 0.4)
    assert [r.pore_id for r in ds] == [2]
    assert ds.dropped == 1


def test_cutoff_zero_is_identity():
    recs = [rec(a, i) for i, a in enumerate([0.001, 0.5, 3.0])]
    ds = apply_lower_cutoff(recs, 0)
    assert list(ds.records) == recs
    assert ds.dropped == 0


def test_cutoff_209_records():
    rng = np.random.default_rng(209)
    below = rng.uniform(0.02, 0.3999, 57)
    above = rng.uniform(0.4, 30.0, 152)
    areas = np.concatenate([below, above])
    rng.shuffle(areas)
    recs = [rec(float(a), i) for i, a in enumerate(areas)]
    expected_kept = sum(1 for a in areas if a >= 0.4)  # direct scan
    ds = apply_lower_cutoff(recs)
    assert expected_kept == 152
    assert len(ds) == 152
    assert ds.dropped == 57
    assert [r.pore_id for r in ds] == [r.pore_id for r in recs if r.area >= 0.4]


def test_upper_cutoff_optional():
    recs = [rec(a, i) for i, a in enumerate([0.5, 5.0, 50.0])]
    assert len(apply_lower_cutoff(recs)) == 3
    assert [r.area for r in apply_lower_cutoff(recs, 0.4, upper=10.0)] == [0.5, 5.0]


@given(st.lists(st.floats(0.0, 5.0), max_size=40), st.floats(0.0, 5.0))
def test_cutoff_idempotent_and_conserving(areas, cutoff):
    recs = [rec(a, i) for i, a in enumerate(areas)]
    once = apply_lower_cutoff(recs, cutoff)
    twice = apply_lower_cutoff(once.records, cutoff)
    assert once.records == twice.records
    assert len(once) + once.dropped == len(recs)
    assert all(r.area >= cutoff for r in once)


def _ds(n=6):
    return apply_lower_cutoff([rec(1.0 + i, i + 1) for i in range(n)], 0)


def test_empty_label_file_leaves_unlabeled():
    ds = join_labels(_ds(), parse_labels("image_id,pore_id,label\n"))
    assert all(r.label is Label.UNLABELED for r in ds)


def test_one_label_row():
    ds = join_labels(_ds(), parse_labels("image_id,pore_id,label\nimg1,5,shade\n"))
    assert {r.pore_id: r.label for r in ds}[5] is Label.SHADE
    assert all(r.label is Label.UNLABELED for r in ds if r.pore_id != 5)


def test_labels_case_insensitive(tmp_path):
    p = tmp_path / "labels.csv"
    p.write_text("image_id,pore_id,label\nimg1,1,OVERLAP\nimg1,2,Real\n")
    ds = join_labels(_ds(), p)
    assert [r.label for r in ds][:3] == [Label.OVERLAP, Label.REAL, Label.UNLABELED]
    assert read_labels(p)[0] == ("img1", 1, Label.OVERLAP)


def test_unknown_pore():
    with pytest.raises(UnknownPoreId):
        join_labels(_ds(), parse_labels("image_id,pore_id,label\nimg1,999,shade\n"))


def test_duplicate_label():
    with pytest.raises(DuplicateLabel):
        join_labels(_ds(), parse_labels("image_id,pore_id,label\nimg1,2,shade\nimg1,2,real\n"))


def test_invalid_label_value():
    with pytest.raises(InvalidLabelValue):
        parse_labels("image_id,pore_id,label\nimg1,2,blurry\n")


def test_labels_for_cut_pores_accepted_with_known_keys():
    recs = [rec(0.1, 1), rec(1.0, 2)]
    ds = apply_lower_cutoff(recs)
    out = join_labels(ds, [("img1", 1, Label.SHADE)], known_keys=[r.key for r in recs])
    assert [r.label for r in out] == [Label.UNLABELED]


@given(st.lists(st.sampled_from(["real", "shade", "overlap"]), min_size=6, max_size=6))
def test_join_never_changes_features(labs):
    ds = _ds()
    rows = [("img1", i + 1, Label(v)) for i, v in enumerate(labs)]
    out = join_labels(ds, rows)
    assert [r.features for r in out] == [r.features for r in ds]
    assert [r.label.value for r in out] == labs


def test_feature_csv_round_trip():
    recs = [rec(0.123456789, 1), rec(2.5, 2, "img2")]
    text = features_csv(recs)
    assert text.splitlines()[0] == (
        "image_id,pore_id,centroid_x_px,centroid_y_px,area_px,area_um2,perimeter_um,major_um,"
        "minor_um,angle_deg,circularity,aspect_ratio,roundness,solidity"
    )
    assert text.splitlines()[1].split(",")[5] == "0.123457"
    back = parse_features_csv(text)
    assert [r.key for r in back] == [("img1", 1), ("img2", 2)]
    assert back[1].features.area == 2.5
    assert features_csv(back) == text
