"""Per-method suitability classifiers and best-method suggestion.

For each retargeting engine a linear classifier is trained on the learned
shared representation to answer "can this image be well retargeted by
method m".  The suggestion for a new image is the engine with the highest
decision value.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Set, Tuple

import numpy as np

from .annotstats import METHODS, RetargetabilityLabel

WELL_RETARGETED_THRESHOLD = 0.5
CLASSIFIER_MAGIC = b"RTGC"
CLASSIFIER_VERSION = 1


class SelectionError(ValueError):
    """Invalid input to label construction or suggestion."""


class UntrainedClassifierError(RuntimeError):
    """suggest_method called before all four classifiers were trained."""


@dataclass
class MethodClassifier:
    """Linear hinge-loss classifier over the shared representation."""

    method: str
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bias: float = 0.0
    trained: bool = False

    def decision_value(self, x: np.ndarray) -> float:
        if not self.trained:
            raise UntrainedClassifierError(f"classifier for {self.method} not trained")
        return float(self.weights @ np.asarray(x, dtype=np.float64)) + self.bias


def build_selection_labels(
    labels: Sequence[RetargetabilityLabel],
) -> Tuple[Dict[str, Dict[str, int]], Dict[str, Set[str]]]:
    """Per-method +/-1 training labels and the per-image best-method set.

    Method m is positive for an image iff its mean rating score is at
    least 0.5 ("acceptable" or better).  The best set is the argmax over
    method means with ties kept; images where every method falls below
    0.5 are excluded from classifier training entirely.
    """
    per_method: Dict[str, Dict[str, int]] = {m: {} for m in METHODS}
    best: Dict[str, Set[str]] = {}
    for lab in labels:
        missing = [m for m in METHODS if m not in lab.method_means]
        if missing:
            raise SelectionError(f"{lab.image_id}: missing method means {missing}")
        means = lab.method_means
        top = max(means.values())
        best[lab.image_id] = {m for m in METHODS if means[m] == top}
        if top < WELL_RETARGETED_THRESHOLD:
            continue
        for m in METHODS:
            per_method[m][lab.image_id] = (
                1 if means[m] >= WELL_RETARGETED_THRESHOLD else -1
            )
    return per_method, best


def train_classifier(
    method: str,
    x: np.ndarray,
    y: Sequence[int],
    lam: float = 1e-3,
    lr: float = 0.05,
    epochs: int = 200,
    seed: int = 0,
) -> MethodClassifier:
    """SGD on the linear SVM objective  lam/2 ||w||^2 + mean hinge."""
    x = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != yv.size or yv.size < 1:
        raise SelectionError("train_classifier expects (N, D) features and N labels")
    if not np.all(np.isin(yv, (-1.0, 1.0))):
        raise SelectionError("labels must be +1 or -1")
    n, d = x.shape
    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    b = 0.0
    for _ in range(epochs):
        for i in rng.permutation(n):
            margin = yv[i] * (w @ x[i] + b)
            gw = lam * w
            gb = 0.0
            if margin < 1.0:
                gw = gw - yv[i] * x[i]
                gb = -yv[i]
            w = w - lr * gw
            b = b - lr * gb
    clf = MethodClassifier(method=method, weights=w, bias=b, trained=True)
    return clf


def train_all(
    per_method_labels: Dict[str, Dict[str, int]],
    features: Dict[str, np.ndarray],
    lam: float = 1e-3,
    lr: float = 0.05,
    epochs: int = 200,
    seed: int = 0,
) -> Dict[str, MethodClassifier]:
    """Train one classifier per engine from id-keyed labels and features."""
    out: Dict[str, MethodClassifier] = {}
    for k, m in enumerate(METHODS):
        ids = sorted(per_method_labels[m])
        if not ids:
            raise SelectionError(f"no training images for {m}")
        x = np.stack([features[i] for i in ids])
        y = [per_method_labels[m][i] for i in ids]
        out[m] = train_classifier(m, x, y, lam=lam, lr=lr, epochs=epochs, seed=seed + k)
    return out


def suggest_method(classifiers: Dict[str, MethodClassifier], shared_repr: np.ndarray) -> str:
    """Engine with the highest decision value; ties broken by METHODS order."""
    for m in METHODS:
        if m not in classifiers or not classifiers[m].trained:
            raise UntrainedClassifierError(f"classifier for {m} not trained")
    values = [classifiers[m].decision_value(shared_repr) for m in METHODS]
    if not all(np.isfinite(values)):
        raise SelectionError("non-finite decision value")
    return METHODS[int(np.argmax(values))]


def save_classifiers(classifiers: Dict[str, MethodClassifier], path: str) -> None:
    """Binary classifier bundle: RTGC magic, then per-method weight blocks."""
    buf = io.BytesIO()
    buf.write(CLASSIFIER_MAGIC)
    buf.write(struct.pack("<II", CLASSIFIER_VERSION, len(METHODS)))
    for m in METHODS:
        clf = classifiers[m]
        if not clf.trained:
            raise UntrainedClassifierError(f"classifier for {m} not trained")
        name = m.encode("utf-8")
        buf.write(struct.pack("<I", len(name)))
        buf.write(name)
        buf.write(struct.pack("<I", clf.weights.size))
        buf.write(clf.weights.astype("<f4").tobytes())
        buf.write(struct.pack("<f", clf.bias))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_classifiers(path: str) -> Dict[str, MethodClassifier]:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != CLASSIFIER_MAGIC:
        raise SelectionError("bad classifier file magic")
    version, count = struct.unpack("<II", buf.read(8))
    if version != CLASSIFIER_VERSION:
        raise SelectionError(f"unsupported classifier file version {version}")
    out: Dict[str, MethodClassifier] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", buf.read(4))
        name = buf.read(nlen).decode("utf-8")
        (d,) = struct.unpack("<I", buf.read(4))
        w = np.frombuffer(buf.read(4 * d), dtype="<f4").astype(np.float64)
        (b,) = struct.unpack("<f", buf.read(4))
        out[name] = MethodClassifier(method=name, weights=w, bias=float(b), trained=True)
    if set(out) != set(METHODS):
        raise SelectionError("classifier file does not cover all four engines")
    return out
