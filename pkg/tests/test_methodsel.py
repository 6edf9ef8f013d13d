import numpy as np
import pytest

from retargetkit.annotstats import METHODS, RetargetabilityLabel
from retargetkit.methodsel import (
    MethodClassifier,
    SelectionError,
    UntrainedClassifierError,
    build_selection_labels,
    load_classifiers,
    save_classifiers,
    suggest_method,
    train_all,
    train_classifier,
)


def _label(image_id, means):
    return RetargetabilityLabel(image_id=image_id, method_means=dict(zip(METHODS, means)))


def test_selection_labels_thresholds_and_best():
    per_method, best = build_selection_labels([_label("a", (1.0, 0.5, 0.0, 0.25))])
    assert per_method["multi_operator"]["a"] == 1
    assert per_method["aad_warp"]["a"] == 1
    assert per_method["shift_map"]["a"] == -1
    assert per_method["crop"]["a"] == -1
    assert best["a"] == {"multi_operator"}


def test_selection_labels_full_tie():
    _, best = build_selection_labels([_label("a", (0.5, 0.5, 0.5, 0.5))])
    assert best["a"] == set(METHODS)


def test_selection_labels_all_poor_excluded():
    per_method, best = build_selection_labels([_label("a", (0.4, 0.3, 0.2, 0.1))])
    assert all("a" not in per_method[m] for m in METHODS)
    assert best["a"] == {"multi_operator"}


def test_selection_labels_missing_method():
    lab = RetargetabilityLabel(image_id="a", method_means={"crop": 1.0})
    with pytest.raises(SelectionError):
        build_selection_labels([lab])


def _trained(method, w, b):
    return MethodClassifier(method=method, weights=np.asarray(w, float), bias=b, trained=True)


def _fixed_classifiers(values):
    return {
        m: _trained(m, [0.0], values[k]) for k, m in enumerate(METHODS)
    }


def test_suggest_argmax():
    clfs = _fixed_classifiers([0.2, 0.9, 0.1, 0.5])
    assert suggest_method(clfs, np.zeros(1)) == "aad_warp"


def test_suggest_tie_order():
    clfs = _fixed_classifiers([0.3, 0.3, 0.3, 0.3])
    assert suggest_method(clfs, np.zeros(1)) == "multi_operator"


def test_suggest_constant_shift_invariant():
    base = [0.2, 0.9, 0.1, 0.5]
    a = suggest_method(_fixed_classifiers(base), np.zeros(1))
    b = suggest_method(_fixed_classifiers([v + 7.0 for v in base]), np.zeros(1))
    assert a == b


def test_suggest_untrained_raises():
    clfs = _fixed_classifiers([0.0, 0.0, 0.0, 0.0])
    clfs["crop"].trained = False
    with pytest.raises(UntrainedClassifierError):
        suggest_method(clfs, np.zeros(1))


def test_training_deterministic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(30, 6))
    y = np.where(x[:, 0] > 0, 1, -1)
    a = train_classifier("crop", x, y, seed=11)
    b = train_classifier("crop", x, y, seed=11)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias
    assert np.all(np.isfinite(a.weights)) and np.isfinite(a.bias)


def _separable_dataset(seed=0, n=200, d=8):
    """Two clusters per engine: each engine is positive on its own cluster."""
    rng = np.random.default_rng(seed)
    centers = np.eye(len(METHODS), d) * 6.0
    feats, owner = [], []
    for k in range(len(METHODS)):
        pts = centers[k] + 0.3 * rng.normal(size=(n // 4, d))
        feats.append(pts)
        owner += [k] * (n // 4)
    return np.concatenate(feats), np.asarray(owner)


def test_synthetic_separable_accuracy():
    x, owner = _separable_dataset()
    n = x.shape[0]
    split = int(0.7 * n)
    perm = np.random.default_rng(1).permutation(n)
    tr, te = perm[:split], perm[split:]
    features = {str(i): x[i] for i in range(n)}
    per_method = {
        m: {str(i): (1 if owner[i] == k else -1) for i in tr}
        for k, m in enumerate(METHODS)
    }
    clfs = train_all(per_method, features, epochs=120, seed=5)
    correct = sum(
        suggest_method(clfs, x[i]) == METHODS[owner[i]] for i in te
    )
    assert correct / len(te) >= 0.95


def test_classifier_file_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    clfs = {
        m: _trained(m, rng.normal(size=5).astype(np.float32).astype(np.float64), 0.25)
        for m in METHODS
    }
    path = tmp_path / "clf.rtgc"
    save_classifiers(clfs, str(path))
    loaded = load_classifiers(str(path))
    for m in METHODS:
        assert np.array_equal(loaded[m].weights, clfs[m].weights)
        assert loaded[m].bias == pytest.approx(clfs[m].bias, abs=1e-7)
    # saving the loaded bundle reproduces the file byte-for-byte
    path2 = tmp_path / "clf2.rtgc"
    save_classifiers(loaded, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def test_classifier_file_bad_magic(tmp_path):
    path = tmp_path / "junk.rtgc"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(SelectionError):
        load_classifiers(str(path))
