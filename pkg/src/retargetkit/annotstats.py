"""Annotation dataset handling and rating statistics.

Covers the JSON-lines dataset manifest, rating aggregation into retargetability
labels, Kendall's coefficient of concordance, Ridit analysis, and attribute
correlation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaincc

METHODS = ("multi_operator", "aad_warp", "shift_map", "crop")
LEVELS = ("good", "acceptable", "poor")
LEVEL_SCORES = {"good": 1.0, "acceptable": 0.5, "poor": 0.0}

ATTRIBUTE_NAMES = (
    "people_faces", "lines_boundaries", "single_object", "multiple_objects",
    "diagonal_composition", "texture", "repeating_patterns",
    "geometric_structures", "perspective", "fuzzy", "text",
    "shading_contrast", "content_rich", "symmetry",
)
N_ATTRIBUTES = 14

DEFAULT_RATER_COUNT = 6
SIGNIFICANCE_LEVEL = 0.05


class AnnotationError(Exception):
    pass


class IncompleteDataError(AnnotationError):
    def __init__(self, gaps):
        self.gaps = gaps
        super().__init__(f"missing ratings for {gaps}")


@dataclass(frozen=True)
class RatingRecord:
    image_id: str
    method: str
    rater_id: str
    level: str
    timestamp: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise AnnotationError(f"unknown method {self.method!r}")
        if self.level not in LEVELS:
            raise AnnotationError(f"unknown level {self.level!r}")

    @property
    def score(self) -> float:
        return LEVEL_SCORES[self.level]


@dataclass(frozen=True)
class ImageAnnotation:
    image_id: str
    attributes: tuple[int, ...]

    def __post_init__(self):
        if len(self.attributes) != N_ATTRIBUTES:
            raise AnnotationError(f"expected {N_ATTRIBUTES} flags, got {len(self.attributes)}")
        if any(a not in (-1, 1) for a in self.attributes):
            raise AnnotationError("attribute flags must be +1 or -1")


@dataclass(frozen=True)
class RetargetabilityLabel:
    image_id: str
    method_means: dict[str, float]
    aggregation_mode: str = "MAX-De"

    @property
    def score_max(self) -> float:
        return max(self.method_means.values())

    @property
    def score_mean(self) -> float:
        return sum(self.method_means.values()) / len(self.method_means)

    @property
    def score(self) -> float:
        return self.score_max if self.aggregation_mode == "MAX-De" else self.score_mean


@dataclass
class DatasetEntry:
    image_id: str
    file: str = ""
    attributes: tuple[int, ...] | None = None
    ratings: list[RatingRecord] = field(default_factory=list)


def aggregate_ratings(records: list[RatingRecord], mode: str = "MAX-De") -> dict[str, RetargetabilityLabel]:
    """Per-image retargetability labels from rater scores.

    Every (image, method) pair must have at least one rating; gaps raise
    IncompleteDataError listing them.
    """
    if mode not in ("MAX-De", "MEAN-De"):
        raise AnnotationError(f"unknown aggregation mode {mode!r}")
    by_image: dict[str, dict[str, list[float]]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, {}).setdefault(rec.method, []).append(rec.score)
    gaps = [
        (image_id, method)
        for image_id, methods in sorted(by_image.items())
        for method in METHODS
        if method not in methods
    ]
    if gaps:
        raise IncompleteDataError(gaps)
    return {
        image_id: RetargetabilityLabel(
            image_id,
            {m: float(np.mean(scores)) for m, scores in methods.items()},
            mode,
        )
        for image_id, methods in by_image.items()
    }


def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-squared distribution (upper incomplete gamma)."""
    return float(gammaincc(df / 2.0, x / 2.0))


def kendalls_w(ratings: np.ndarray) -> tuple[float, float]:
    """Kendall's coefficient of concordance with tie correction.

    ratings has shape (m raters, n items); returns (W, p-value). The fully tied
    degenerate case (zero denominator) is defined as W = 0.
    """
    ratings = np.asarray(ratings, dtype=np.float64)
    m, n = ratings.shape
    if m < 2 or n < 2:
        raise AnnotationError(f"need >= 2 raters and >= 2 items, got {m}x{n}")
    ranks = np.stack([_midranks(row) for row in ratings])
    rank_sums = ranks.sum(axis=0)
    s = float(((rank_sums - rank_sums.mean()) ** 2).sum())
    tie_correction = 0.0
    for row in ratings:
        _, counts = np.unique(row, return_counts=True)
        tie_correction += float((counts**3 - counts).sum())
    denom = m * m * (n**3 - n) - m * tie_correction
    if denom <= 0.0:
        return 0.0, 1.0
    w = 12.0 * s / denom
    chi2 = m * (n - 1) * w
    return w, chi2_sf(chi2, n - 1)


def ridit_reference(counts: np.ndarray) -> np.ndarray:
    """Per-category ridit values of the reference distribution."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise AnnotationError("reference distribution is empty")
    below = np.concatenate([[0.0], np.cumsum(counts)[:-1]])
    return (below + counts / 2.0) / total


def ridit_analysis(
    reference_counts: np.ndarray, groups: dict[str, np.ndarray]
) -> dict[str, tuple[float, float]]:
    """Mean ridit and 95% CI half-width per group; empty groups are skipped."""
    ridits = ridit_reference(reference_counts)
    out = {}
    for name, counts in groups.items():
        counts = np.asarray(counts, dtype=np.float64)
        n = counts.sum()
        if n <= 0:
            continue
        mean = float((ridits * counts).sum() / n)
        ci95 = 1.96 / np.sqrt(12.0 * n)
        out[name] = (mean, float(ci95))
    return out


def bin_scores_to_levels(scores: np.ndarray) -> np.ndarray:
    """Bin continuous scores in [0,1] to the nearest rating level {0, 0.5, 1} -> index."""
    levels = np.array([0.0, 0.5, 1.0])
    return np.argmin(np.abs(np.asarray(scores)[:, None] - levels[None, :]), axis=1)


def attribute_correlation(annotations: list[ImageAnnotation]) -> np.ndarray:
    """Pearson (phi) correlation matrix of the +-1 attribute flags."""
    if len(annotations) < 2:
        raise AnnotationError("need at least 2 annotated images")
    flags = np.array([a.attributes for a in annotations], dtype=np.float64)
    centered = flags - flags.mean(axis=0)
    std = centered.std(axis=0)
    corr = np.eye(N_ATTRIBUTES)
    for i in range(N_ATTRIBUTES):
        for j in range(i + 1, N_ATTRIBUTES):
            if std[i] > 0 and std[j] > 0:
                c = (centered[:, i] * centered[:, j]).mean() / (std[i] * std[j])
            else:
                c = 0.0
            corr[i, j] = corr[j, i] = c
    return corr


# ------------------------------------------------------------------- manifest


def entry_to_json(entry: DatasetEntry) -> dict:
    return {
        "image_id": entry.image_id,
        "file": entry.file,
        "attributes": list(entry.attributes) if entry.attributes is not None else None,
        "ratings": [
            {"method": r.method, "rater": r.rater_id, "level": r.level, "ts": r.timestamp}
            for r in entry.ratings
        ],
    }


def entry_from_json(obj: dict) -> DatasetEntry:
    attrs = obj.get("attributes")
    return DatasetEntry(
        image_id=obj["image_id"],
        file=obj.get("file", ""),
        attributes=tuple(attrs) if attrs is not None else None,
        ratings=[
            RatingRecord(obj["image_id"], r["method"], r["rater"], r["level"], r.get("ts", 0.0))
            for r in obj.get("ratings", [])
        ],
    )


def save_manifest(path: str, entries: list[DatasetEntry]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            f.write(json.dumps(entry_to_json(entry), sort_keys=True) + "\n")


def load_manifest(path: str) -> list[DatasetEntry]:
    entries = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(entry_from_json(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise AnnotationError(f"bad manifest record at line {i + 1}: {exc}") from exc
    return entries


def manifest_ratings(entries: list[DatasetEntry]) -> list[RatingRecord]:
    return [r for entry in entries for r in entry.ratings]
