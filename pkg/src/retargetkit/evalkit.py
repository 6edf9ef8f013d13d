"""Evaluation metrics and the assessment-set filter.

Implements the offline evaluation toolbox: RMSE over retargetability
predictions, ROC/AUC with rank-averaged tie handling, per-attribute
accuracy, and the band filter that picks images useful for assessing a
new retargeting method.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Dict, Iterable, List, Sequence, Set, Tuple

import numpy as np

DEFAULT_ASSESSMENT_BAND = (0.0, 0.75)


class EvalError(ValueError):
    """Invalid input to a metric."""


class UndefinedAUCError(EvalError):
    """ROC/AUC requested with only one class present."""


def rmse(y: Sequence[float], y_star: Sequence[float]) -> float:
    """Root mean squared error between labels and predictions."""
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(y_star, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise EvalError("rmse expects two equal-length vectors of length >= 1")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _rank_average(scores: np.ndarray) -> np.ndarray:
    """Midranks (1-based) of ``scores`` with ties sharing their average rank."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(
    y: Sequence[float], scores: Sequence[float], sigma: float
) -> Tuple[List[Tuple[float, float, float]], float]:
    """ROC curve and AUC for scores against labels thresholded at ``sigma``.

    Labels become +1 when y >= sigma, else -1.  The curve sweeps every
    distinct score as a decision threshold (predict positive when the
    score >= threshold); points are (threshold, TPR, FPR).  The AUC is
    the Mann-Whitney statistic, so exhaustive ties yield exactly 0.5.
    """
    yv = np.asarray(y, dtype=np.float64)
    sv = np.asarray(scores, dtype=np.float64)
    if yv.shape != sv.shape or yv.ndim != 1 or yv.size < 1:
        raise EvalError("roc_auc expects two equal-length vectors")
    pos = yv >= sigma
    n_pos = int(pos.sum())
    n_neg = int(yv.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC undefined: only one class after thresholding")

    points: List[Tuple[float, float, float]] = []
    thresholds = np.concatenate(([np.inf], np.unique(sv)[::-1], [-np.inf]))
    for t in thresholds:
        pred = sv >= t
        tpr = float(np.sum(pred & pos)) / n_pos
        fpr = float(np.sum(pred & ~pos)) / n_neg
        points.append((float(t), tpr, fpr))

    ranks = _rank_average(sv)
    auc = (float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return points, auc


def attribute_accuracy(
    flags_pred: Sequence[Sequence[int]], flags_true: Sequence[Sequence[int]]
) -> np.ndarray:
    """Per-attribute fraction of images whose predicted flag matches."""
    p = np.asarray(flags_pred, dtype=np.float64)
    t = np.asarray(flags_true, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 2 or p.shape[0] < 1:
        raise EvalError("attribute_accuracy expects aligned (N, M) flag arrays")
    return np.mean(p == t, axis=0)


def assessment_filter(
    scores: Dict[str, float],
    band: Tuple[float, float] = DEFAULT_ASSESSMENT_BAND,
) -> Set[str]:
    """Image ids whose score lies in (band[0], band[1]].

    The lower bound is strict (perfectly un-retargetable images carry no
    signal) and the upper bound is closed.
    """
    lo, hi = band
    return {img_id for img_id, s in scores.items() if lo < s <= hi}


def metrics_report_json(
    rmse_value: float,
    auc: float,
    roc_points: Iterable[Tuple[float, float, float]],
    attr_acc: Sequence[float],
) -> str:
    """Serialize an evaluation run for external consumption."""
    payload = {
        "rmse": rmse_value,
        "auc": auc,
        "roc": [{"threshold": t, "tpr": tpr, "fpr": fpr} for t, tpr, fpr in roc_points],
        "attribute_accuracy": [float(a) for a in attr_acc],
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def roc_csv(roc_points: Iterable[Tuple[float, float, float]]) -> str:
    """Plot-data CSV with one (threshold, TPR, FPR) row per ROC point."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["threshold", "tpr", "fpr"])
    for t, tpr, fpr in roc_points:
        writer.writerow([repr(t), repr(tpr), repr(fpr)])
    return buf.getvalue()
