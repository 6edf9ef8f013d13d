"""Optimal cropping: exhaustive window search over the importance integral image."""

from __future__ import annotations

import numpy as np

from .. import imaging


def best_window(imp: np.ndarray, target_w: int, target_h: int) -> tuple[int, int, float]:
    """Top-left corner (x, y) of the target-sized window maximizing summed importance.

    Ties resolve to the smallest y, then smallest x. Also returns the retention
    ratio (window importance / total importance; 1.0 when total is zero).
    """
    imp = np.asarray(imp, dtype=np.float64)
    h, w = imp.shape
    if target_w > w or target_h > h:
        raise imaging.BoundsError(
            f"target {target_w}x{target_h} exceeds source {w}x{h}"
        )
    ii = imaging.integral_image(imp)
    sums = (
        ii[target_h:, target_w:]
        - ii[target_h:, :-target_w or None][:, : w - target_w + 1]
        - ii[:-target_h or None, target_w:][: h - target_h + 1]
        + ii[: h - target_h + 1, : w - target_w + 1]
    )
    flat = int(np.argmax(sums))  # row-major: smallest y, then x, on ties
    y, x = divmod(flat, sums.shape[1])
    total = float(ii[-1, -1])
    retention = 1.0 if total <= 0.0 else float(sums[y, x]) / total
    return x, y, retention


def crop_optimal(
    img: np.ndarray, imp: np.ndarray, target_w: int, target_h: int
) -> tuple[np.ndarray, dict]:
    """Crop to the importance-maximizing window of exactly the target size."""
    img = imaging.as_image(img)
    x, y, retention = best_window(imp, target_w, target_h)
    out = imaging.crop_window(img, x, y, target_w, target_h)
    return out, {"window": (x, y), "retention": retention}
