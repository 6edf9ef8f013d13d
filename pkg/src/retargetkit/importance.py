"""Per-pixel importance maps: global-contrast saliency, external masks, and merging.

An importance map is a float64 (H, W) array with values in [0, 1], matching the
dimensions of the source image it guides.
"""

from __future__ import annotations

import numpy as np

from . import imaging

QUANT_BINS = 12
RARE_COLOR_CUTOFF = 0.05


class ImportanceError(Exception):
    pass


def _check_map(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ImportanceError(f"importance map must be 2-D, got shape {m.shape}")
    if np.nanmin(m) < 0.0 or np.nanmax(m) > 1.0 or not np.isfinite(m).all():
        raise ImportanceError("importance values must be finite and within [0, 1]")
    return m


def saliency_global_contrast(img: np.ndarray) -> np.ndarray:
    """Histogram-contrast saliency.

    Colors are quantized to QUANT_BINS per channel; rare colors jointly covering
    less than RARE_COLOR_CUTOFF of the pixels are reassigned to the nearest kept
    color. Saliency of a color is the frequency-weighted sum of its RGB distance
    to every kept color, min-max normalized to [0, 1] (all-equal defined as 0).
    """
    img = imaging.as_image(img)
    h, w = img.shape[:2]
    q = np.minimum((img * QUANT_BINS).astype(np.intp), QUANT_BINS - 1)
    codes = (q[..., 0] * QUANT_BINS + q[..., 1]) * QUANT_BINS + q[..., 2]
    flat = codes.ravel()
    uniq, counts = np.unique(flat, return_counts=True)

    # representative color of each bin = bin center
    r = uniq // (QUANT_BINS * QUANT_BINS)
    g = (uniq // QUANT_BINS) % QUANT_BINS
    b = uniq % QUANT_BINS
    centers = (np.stack([r, g, b], axis=1) + 0.5) / QUANT_BINS

    # keep the most frequent colors covering >= 1 - cutoff of the pixels
    order = np.argsort(-counts, kind="stable")
    covered = np.cumsum(counts[order]) / flat.size
    n_keep = int(np.searchsorted(covered, 1.0 - RARE_COLOR_CUTOFF) + 1)
    n_keep = min(n_keep, uniq.size)
    kept = order[:n_keep]
    kept_centers = centers[kept]

    # reassign every color (rare ones included) to its nearest kept color
    d2 = ((centers[:, None, :] - kept_centers[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)

    kept_counts = np.zeros(n_keep)
    np.add.at(kept_counts, assign, counts)
    freq = kept_counts / flat.size

    dist = np.sqrt(((kept_centers[:, None, :] - kept_centers[None, :, :]) ** 2).sum(axis=2))
    sal_kept = dist @ freq

    lo, hi = sal_kept.min(), sal_kept.max()
    if hi - lo <= 0.0:
        sal_kept = np.zeros_like(sal_kept)
    else:
        sal_kept = (sal_kept - lo) / (hi - lo)

    # back to pixels via color code -> kept index
    code_to_sal = sal_kept[assign]
    lut = np.zeros(QUANT_BINS**3)
    lut[uniq] = code_to_sal
    return lut[flat].reshape(h, w)


def merge_importance(maps: list[np.ndarray]) -> np.ndarray:
    """Per-pixel arithmetic mean of importance maps with identical dimensions."""
    if not maps:
        raise ImportanceError("need at least one importance map")
    checked = [_check_map(m) for m in maps]
    shape = checked[0].shape
    for m in checked[1:]:
        if m.shape != shape:
            raise ImportanceError(f"dimension mismatch: {m.shape} vs {shape}")
    return np.mean(np.stack(checked), axis=0)


def load_external_mask(path: str) -> np.ndarray:
    """Load an 8-bit grayscale PNG mask as an importance map (v/255)."""
    with open(path, "rb") as f:
        return imaging.decode_gray(f.read())


def importance_for(img: np.ndarray, masks: list[np.ndarray] | None = None) -> np.ndarray:
    """Saliency map averaged with any external cue masks of matching size."""
    maps = [saliency_global_contrast(img)]
    for m in masks or []:
        m = _check_map(m)
        if m.shape != maps[0].shape:
            raise ImportanceError(
                f"mask {m.shape[1]}x{m.shape[0]} does not match image "
                f"{maps[0].shape[1]}x{maps[0].shape[0]}"
            )
        maps.append(m)
    return merge_importance(maps)
