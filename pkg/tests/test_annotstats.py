import numpy as np
import pytest

from retargetkit import annotstats as st


def rec(image, method, rater, level):
    return st.RatingRecord(image, method, rater, level)


def full_ratings(image, levels_per_method):
    out = []
    for method, levels in zip(st.METHODS, levels_per_method):
        for i, level in enumerate(levels):
            out.append(rec(image, method, f"r{i}", level))
    return out


def test_level_scores():
    assert st.LEVEL_SCORES == {"good": 1.0, "acceptable": 0.5, "poor": 0.0}


def test_method_mean_six_raters():
    levels = ["good"] * 3 + ["acceptable"] * 2 + ["poor"]
    records = full_ratings("img1", [levels, ["good"], ["good"], ["good"]])
    labels = st.aggregate_ratings(records)
    assert labels["img1"].method_means["multi_operator"] == pytest.approx(2 / 3)


def test_max_de_of_hand_computed_means():
    label = st.RetargetabilityLabel("x", dict(zip(st.METHODS, [0.5, 5 / 6, 0.25, 0.5])))
    assert label.score_max == pytest.approx(5 / 6)
    assert label.score == label.score_max
    mean_label = st.RetargetabilityLabel(
        "x", dict(zip(st.METHODS, [0.5, 5 / 6, 0.25, 0.5])), "MEAN-De"
    )
    assert mean_label.score == pytest.approx((0.5 + 5 / 6 + 0.25 + 0.5) / 4)


def test_all_good_scores_one():
    records = full_ratings("i", [["good"] * 2] * 4)
    label = st.aggregate_ratings(records)["i"]
    assert label.score_max == 1.0
    assert label.score_mean == 1.0


def test_incomplete_ratings_error_lists_gaps():
    records = [rec("i", "crop", "r0", "good")]
    with pytest.raises(st.IncompleteDataError) as err:
        st.aggregate_ratings(records)
    assert ("i", "multi_operator") in err.value.gaps


def test_aggregate_monotone_in_single_rating():
    base = full_ratings("i", [["poor", "acceptable"]] * 4)
    raised = [r for r in base]
    raised[0] = rec("i", base[0].method, base[0].rater_id, "good")
    low = st.aggregate_ratings(base)["i"].score_max
    high = st.aggregate_ratings(raised)["i"].score_max
    assert high >= low


def test_kendalls_w_perfect_concordance():
    ratings = np.array([[1.0, 2.0, 3.0, 4.0]] * 3)
    w, p = st.kendalls_w(ratings)
    assert w == pytest.approx(1.0)
    assert 0.0 <= p <= 1.0


def test_kendalls_w_worked_example():
    # ranks (1,2,3), (1,2,3), (3,2,1): rank sums (5,6,7), S=2, W = 24/216 = 1/9
    ratings = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
    w, _ = st.kendalls_w(ratings)
    assert w == pytest.approx(1 / 9, abs=1e-12)


def test_kendalls_w_degenerate_all_ties():
    ratings = np.array([[2.0, 2.0, 2.0], [5.0, 5.0, 5.0]])
    w, p = st.kendalls_w(ratings)
    assert w == 0.0
    assert p == 1.0


def test_kendalls_w_monotone_transform_invariant():
    rng = np.random.default_rng(30)
    ratings = rng.random((4, 5))
    w1, _ = st.kendalls_w(ratings)
    transformed = ratings.copy()
    transformed[0] = np.exp(3 * transformed[0])  # strictly increasing
    w2, _ = st.kendalls_w(transformed)
    assert w1 == pytest.approx(w2, abs=1e-12)


def test_kendalls_w_rejects_small_input():
    with pytest.raises(st.AnnotationError):
        st.kendalls_w(np.array([[1.0, 2.0]]))


def test_ridit_reference_worked_example():
    ridits = st.ridit_reference(np.array([2, 2, 2]))
    assert np.allclose(ridits, [1 / 6, 1 / 2, 5 / 6])


def test_ridit_reference_self_mean_half():
    rng = np.random.default_rng(31)
    counts = rng.integers(1, 20, size=5).astype(float)
    result = st.ridit_analysis(counts, {"self": counts})
    assert result["self"][0] == pytest.approx(0.5, abs=1e-12)


def test_ridit_group_weighted_mean():
    result = st.ridit_analysis(np.array([2, 2, 2]), {"g": np.array([0, 1, 1])})
    assert result["g"][0] == pytest.approx(2 / 3)
    assert result["g"][1] == pytest.approx(1.96 / np.sqrt(24.0))


def test_ridit_skips_empty_group():
    result = st.ridit_analysis(np.array([1, 1]), {"empty": np.array([0, 0])})
    assert "empty" not in result


def test_ridit_values_increasing_in_unit_interval():
    rng = np.random.default_rng(32)
    counts = rng.integers(1, 50, size=7).astype(float)
    ridits = st.ridit_reference(counts)
    assert np.all(np.diff(ridits) > 0)
    assert ridits.min() > 0.0 and ridits.max() < 1.0


def make_annotation(image_id, flags):
    padded = list(flags) + [1] * (st.N_ATTRIBUTES - len(flags))
    return st.ImageAnnotation(image_id, tuple(padded))


def test_correlation_diagonal_and_bounds():
    rng = np.random.default_rng(33)
    annos = [
        make_annotation(f"i{k}", rng.choice([-1, 1], size=st.N_ATTRIBUTES).tolist())
        for k in range(20)
    ]
    corr = st.attribute_correlation(annos)
    assert np.allclose(np.diag(corr), 1.0)
    assert np.allclose(corr, corr.T)
    assert corr.min() >= -1.0 - 1e-12 and corr.max() <= 1.0 + 1e-12


def test_correlation_complementary_flags():
    annos = [
        make_annotation("a", [1, -1]),
        make_annotation("b", [-1, 1]),
        make_annotation("c", [1, -1]),
    ]
    corr = st.attribute_correlation(annos)
    assert corr[0, 1] == pytest.approx(-1.0)


def test_correlation_orthogonal_flags():
    annos = [
        make_annotation("a", [1, 1]),
        make_annotation("b", [1, -1]),
        make_annotation("c", [-1, 1]),
        make_annotation("d", [-1, -1]),
    ]
    corr = st.attribute_correlation(annos)
    assert corr[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_manifest_round_trip(tmp_path):
    entries = [
        st.DatasetEntry(
            "img1",
            "img1.png",
            tuple([1, -1] * 7),
            [rec("img1", "crop", "r0", "good"), rec("img1", "aad_warp", "r1", "poor")],
        ),
        st.DatasetEntry("img2", "img2.png"),
    ]
    path = tmp_path / "manifest.jsonl"
    st.save_manifest(str(path), entries)
    loaded = st.load_manifest(str(path))
    assert [e.image_id for e in loaded] == ["img1", "img2"]
    assert loaded[0].attributes == entries[0].attributes
    assert loaded[0].ratings == entries[0].ratings
    # byte-identical round trip modulo key order
    second = tmp_path / "again.jsonl"
    st.save_manifest(str(second), loaded)
    assert path.read_bytes() == second.read_bytes()


def test_bin_scores_to_levels():
    idx = st.bin_scores_to_levels(np.array([0.0, 0.2, 0.3, 0.6, 0.9]))
    assert idx.tolist() == [0, 0, 1, 1, 2]
