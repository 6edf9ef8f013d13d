"""Multi-operator retargeting: crop / seam-carve / scale fractions on a simplex grid.

The width reduction R is split as (crop a*R, carve b*R, scale c*R) with
a+b+c=1 stepped by 0.25. Each candidate applies crop, then seam carving, then
uniform scaling, and is scored by importance retention times normalized
cross-correlation against the source. Ties prefer a larger carve fraction,
then a larger crop fraction.
"""

from __future__ import annotations

import numpy as np

from .. import imaging
from .cropopt import best_window
from .seam import carve

SIMPLEX_STEP = 0.25
NCC_MAX_WIDTH = 64


def simplex_fractions(step: float = SIMPLEX_STEP) -> list[tuple[float, float, float]]:
    """All (crop, carve, scale) fractions on the step grid, in tie-break order."""
    n = round(1.0 / step)
    grid = [
        (a / n, b / n, (n - a - b) / n)
        for b in range(n, -1, -1)
        for a in range(n - b, -1, -1)
    ]
    return grid


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    na, nb = np.sqrt((da * da).sum()), np.sqrt((db * db).sum())
    if na <= 1e-12 or nb <= 1e-12:
        return 1.0 if na <= 1e-12 and nb <= 1e-12 else 0.0
    return float((da * db).sum() / (na * nb))


def _similarity(candidate: np.ndarray, source: np.ndarray) -> float:
    """NCC between the candidate (upscaled back) and the source, on small grayscale."""
    h, w = source.shape[:2]
    back = imaging.uniform_scale(candidate, w, h)
    if w > NCC_MAX_WIDTH:
        scale = NCC_MAX_WIDTH / w
        back = imaging.uniform_scale(back, NCC_MAX_WIDTH, max(1, round(h * scale)))
        source = imaging.uniform_scale(source, NCC_MAX_WIDTH, max(1, round(h * scale)))
    return _ncc(imaging.to_gray(back), imaging.to_gray(source))


def multi_operator(img: np.ndarray, imp: np.ndarray, target_w: int) -> tuple[np.ndarray, dict]:
    """Width-reducing multi-operator retarget; height handled by the dispatcher."""
    img = imaging.as_image(img)
    imp = np.asarray(imp, dtype=np.float64)
    h, w = img.shape[:2]
    if target_w > w:
        raise ValueError("multi-operator only reduces the changing dimension")
    reduction = w - target_w
    if reduction == 0:
        return img.copy(), {"fractions": (0.0, 0.0, 0.0), "score": 1.0}

    total_imp = float(imp.sum())
    best = None
    for a, b, c in simplex_fractions():
        crop_px = round(a * reduction)
        carve_px = round(b * reduction)
        crop_px = min(crop_px, reduction)
        carve_px = min(carve_px, reduction - crop_px)

        cur_img, cur_imp = img, imp
        kept = total_imp
        if crop_px > 0:
            cw = w - crop_px
            x, y, _ = best_window(cur_imp, cw, h)
            cur_img = imaging.crop_window(cur_img, x, y, cw, h)
            cur_imp = cur_imp[y : y + h, x : x + cw]
            kept = float(cur_imp.sum())
        if carve_px > 0:
            if carve_px >= cur_img.shape[1]:
                continue
            cur_img, cur_imp, _ = carve(cur_img, cur_imp, carve_px)
            kept = float(cur_imp.sum())
        if cur_img.shape[1] != target_w:
            cur_img = imaging.uniform_scale(cur_img, target_w, h)

        retention = 1.0 if total_imp <= 0.0 else kept / total_imp
        score = retention * _similarity(cur_img, img)
        if best is None or score > best[0] + 1e-12:
            best = (score, (a, b, c), cur_img, retention)

    score, fracs, out, retention = best
    return out, {"fractions": fracs, "score": score, "retention": retention}
