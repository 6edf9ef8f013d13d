import numpy as np
import pytest

from retargetkit import features, imaging
from retargetkit.features import ExtractorSpec


def rand_img(seed, h, w):
    return np.random.default_rng(seed).random((h, w, 3))


def test_dense_crops_square_input_degenerate():
    img = rand_img(40, 224, 224)
    crops = features.dense_crops(img)
    assert len(crops) == 10
    for k in range(0, 10, 2):
        assert np.allclose(crops[k], crops[0])
        assert np.allclose(crops[k + 1], crops[0][:, ::-1])


def test_dense_crops_corner_offsets():
    img = rand_img(41, 224, 448)
    crops = features.dense_crops(img)
    assert np.allclose(crops[0], img[:, :224])
    assert np.allclose(crops[2], img[:, 224:])


def test_single_resize_is_one_crop():
    img = rand_img(42, 100, 60)
    crops = features.single_resize(img)
    assert len(crops) == 1
    assert crops[0].shape == (224, 224, 3)


def test_extract_mean_of_identical_crops():
    img = rand_img(43, 224, 224)
    crops = features.dense_crops(img)
    fm = features.extract(img)
    per_crop = np.mean([features.descriptor(c) for c in crops], axis=0)
    assert np.allclose(fm, per_crop)


def test_constant_image_descriptor():
    crop = np.full((224, 224, 3), 0.25)
    vec = features.descriptor(crop)
    assert np.allclose(vec[:48], 0.25)  # grid mean color
    assert np.allclose(vec[48:176], 0.0)  # gradient histograms
    assert np.allclose(vec[240:], 0.0)  # luminance variance


def test_extract_componentwise_mean_of_crops():
    for seed in (44, 45, 46):
        img = rand_img(seed, 64, 80)
        crops = features.dense_crops(img)
        fm = features.extract(img)
        assert np.allclose(fm, np.mean([features.descriptor(c) for c in crops], axis=0),
                           atol=1e-9)


def test_extract_encoding_invariant():
    img = rand_img(47, 40, 50)
    decoded = imaging.decode_image(imaging.encode_png(img))
    assert np.allclose(features.extract(decoded), features.extract(decoded))


def test_mirror_invariance_of_dense_features():
    for seed, (h, w) in ((48, (64, 97)), (49, (81, 64))):
        img = rand_img(seed, h, w)
        fm = features.extract(img)
        fm_mirror = features.extract(img[:, ::-1])
        assert np.allclose(fm, fm_mirror, atol=1e-9)


def test_feature_file_round_trip(tmp_path):
    table = {
        "a": np.array([1.0, 2.0, 3.0, 4.0]),
        "b": np.array([0.5, -1.0, 0.0, 9.0]),
    }
    path = tmp_path / "feats.bin"
    features.export_features(str(path), table)
    loaded = features.import_features(str(path))
    assert set(loaded) == {"a", "b"}
    for k in table:
        assert np.allclose(loaded[k], table[k])


def test_feature_file_rejects_nan(tmp_path):
    path = tmp_path / "bad.bin"
    features.export_features(str(path), {"a": np.array([1.0, float("nan")])})
    with pytest.raises(features.FeatureError, match="record 0"):
        features.import_features(str(path))


def test_feature_file_bad_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(features.FeatureError):
        features.import_features(str(path))


def test_spec_validation():
    with pytest.raises(features.FeatureError):
        ExtractorSpec(kind="vgg")
    assert ExtractorSpec(crop_policy="single_resize").n_crops == 1
    assert ExtractorSpec().n_crops == 10
