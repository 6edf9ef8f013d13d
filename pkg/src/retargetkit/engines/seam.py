"""Seam carving: minimum-energy monotone 8-connected seam removal.

Seam energy is gradient magnitude (central differences, summed over channels)
plus a weighted importance term. The DP breaks ties toward the leftmost parent
and the leftmost seam, so results are fully deterministic.
"""

from __future__ import annotations

import numpy as np

from .. import imaging

LAMBDA_IMPORTANCE = 2.0


def gradient_magnitude(img: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude summed over channels (central differences)."""
    img = np.asarray(img, dtype=np.float64)
    total = np.zeros(img.shape[:2])
    for c in range(img.shape[2]):
        plane = img[:, :, c]
        gy = np.gradient(plane, axis=0) if plane.shape[0] > 1 else np.zeros_like(plane)
        gx = np.gradient(plane, axis=1) if plane.shape[1] > 1 else np.zeros_like(plane)
        total += np.hypot(gx, gy)
    return total


def seam_energy(img: np.ndarray, imp: np.ndarray, lambda_imp: float = LAMBDA_IMPORTANCE) -> np.ndarray:
    """Nonnegative per-pixel energy guiding seam selection."""
    return gradient_magnitude(img) + lambda_imp * np.asarray(imp, dtype=np.float64)


def find_vertical_seam(energy: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-energy vertical seam (one column index per row) and its total energy.

    Ties pick the leftmost parent while accumulating and the leftmost end column.
    """
    energy = np.asarray(energy, dtype=np.float64)
    h, w = energy.shape
    cost = energy[0].copy()
    parent = np.zeros((h, w), dtype=np.intp)
    for y in range(1, h):
        # candidate parents j-1, j, j+1; leftmost wins ties
        padded = np.pad(cost, 1, constant_values=np.inf)
        stacked = np.stack([padded[:-2], padded[1:-1], padded[2:]])
        choice = np.argmin(stacked, axis=0)  # first occurrence = leftmost
        parent[y] = np.arange(w) + choice - 1
        cost = stacked[choice, np.arange(w)] + energy[y]
    end = int(np.argmin(cost))
    seam = np.zeros(h, dtype=np.intp)
    seam[h - 1] = end
    for y in range(h - 1, 0, -1):
        seam[y - 1] = parent[y, seam[y]]
    return seam, float(cost[end])


def remove_vertical_seam(arr: np.ndarray, seam: np.ndarray) -> np.ndarray:
    """Drop one pixel per row at the seam columns."""
    h, w = arr.shape[:2]
    keep = np.ones((h, w), dtype=bool)
    keep[np.arange(h), seam] = False
    if arr.ndim == 3:
        return arr[keep].reshape(h, w - 1, arr.shape[2])
    return arr[keep].reshape(h, w - 1)


def carve(
    img: np.ndarray,
    imp: np.ndarray,
    n_seams: int,
    lambda_imp: float = LAMBDA_IMPORTANCE,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Remove n_seams vertical seams, recomputing energy after each removal.

    Returns (carved image, carved importance, total removed seam energy).
    """
    img = np.asarray(img, dtype=np.float64)
    imp = np.asarray(imp, dtype=np.float64)
    if n_seams >= img.shape[1]:
        raise ValueError(f"cannot remove {n_seams} seams from width {img.shape[1]}")
    total = 0.0
    for _ in range(n_seams):
        seam, cost = find_vertical_seam(seam_energy(img, imp, lambda_imp))
        total += cost
        img = remove_vertical_seam(img, seam)
        imp = remove_vertical_seam(imp, seam)
    return img, imp, total


def seam_carve(img: np.ndarray, imp: np.ndarray, n_seams: int, axis: str = "w") -> np.ndarray:
    """Shrink the image by n_seams along axis ('w' removes vertical seams)."""
    img = imaging.as_image(img)
    if axis not in ("w", "h"):
        raise ValueError(f"axis must be 'w' or 'h', got {axis!r}")
    if axis == "h":
        out, _, _ = carve(img.transpose(1, 0, 2), np.asarray(imp).T, n_seams)
        return out.transpose(1, 0, 2)
    out, _, _ = carve(img, imp, n_seams)
    return out
