"""Axis-aligned warping: importance-weighted quadratic column widths.

Minimizes sum_j S_j (w_j - w0_j)^2 subject to sum w_j = target extent and
w_j >= w_min, where S_j is the mean importance of grid column j. Solved by the
Lagrange closed form with iterative clamping of active lower bounds.
"""

from __future__ import annotations

import numpy as np

from .. import imaging

DEFAULT_COLUMNS = 25
MIN_COLUMN_WIDTH = 1.0
IMPORTANCE_FLOOR = 1e-3


class InfeasibleWarp(Exception):
    pass


def solve_column_widths(
    w0: np.ndarray, saliency: np.ndarray, target: float, w_min: float = MIN_COLUMN_WIDTH
) -> tuple[np.ndarray, float]:
    """Constrained quadratic solve; returns widths and the KKT stationarity residual."""
    w0 = np.asarray(w0, dtype=np.float64)
    s = np.asarray(saliency, dtype=np.float64)
    n = w0.size
    if n * w_min > target + 1e-12:
        raise InfeasibleWarp(f"{n} columns of min width {w_min} exceed target {target}")
    free = np.ones(n, dtype=bool)
    w = w0.copy()
    for _ in range(n + 1):
        budget = target - w_min * np.count_nonzero(~free)
        lam = 2.0 * (budget - w0[free].sum()) / (1.0 / s[free]).sum()
        w[free] = w0[free] + lam / (2.0 * s[free])
        w[~free] = w_min
        below = free & (w < w_min - 1e-12)
        if not below.any():
            break
        free &= ~below
        if not free.any():
            w[:] = w_min
            lam = 0.0
            break
    # stationarity on the free set: 2 S_j (w_j - w0_j) = lambda
    grad = 2.0 * s * (w - w0)
    residual = float(np.max(np.abs(grad[free] - lam))) if free.any() else 0.0
    return w, residual


def _resample_columns(img: np.ndarray, w0: np.ndarray, w: np.ndarray, target_w: int) -> np.ndarray:
    """Render the warp: piecewise-linear map from output x to source x, bilinear rows."""
    src_edges = np.concatenate([[0.0], np.cumsum(w0)])
    out_edges = np.concatenate([[0.0], np.cumsum(w)])
    out_edges *= target_w / out_edges[-1]  # absorb float drift; exact target extent
    centers = np.arange(target_w) + 0.5
    seg = np.clip(np.searchsorted(out_edges, centers, side="right") - 1, 0, w0.size - 1)
    frac = (centers - out_edges[seg]) / (out_edges[seg + 1] - out_edges[seg])
    src_x = src_edges[seg] + frac * (src_edges[seg + 1] - src_edges[seg]) - 0.5
    src_x = np.clip(src_x, 0.0, img.shape[1] - 1.0)
    lo = np.floor(src_x).astype(np.intp)
    hi = np.minimum(lo + 1, img.shape[1] - 1)
    f = (src_x - lo)[None, :, None]
    return img[:, lo] * (1.0 - f) + img[:, hi] * f


def aad_warp(
    img: np.ndarray,
    imp: np.ndarray,
    target_w: int,
    target_h: int,
    n_columns: int = DEFAULT_COLUMNS,
) -> tuple[np.ndarray, dict]:
    """Warp one dimension to the target size by non-uniform column scaling."""
    img = imaging.as_image(img)
    imp = np.asarray(imp, dtype=np.float64)
    h, w = img.shape[:2]
    if target_h != h and target_w != w:
        raise ValueError("exactly one dimension may change")
    if target_h != h:
        out, diag = aad_warp(img.transpose(1, 0, 2), imp.T, target_h, target_w, n_columns)
        return out.transpose(1, 0, 2), diag

    n = max(1, min(n_columns, w // 2))  # each grid column >= 2 source pixels
    edges = np.linspace(0, w, n + 1)
    w0 = np.diff(edges)
    bounds = np.round(edges).astype(int)
    saliency = np.array(
        [imp[:, bounds[j] : max(bounds[j + 1], bounds[j] + 1)].mean() for j in range(n)]
    )
    saliency += IMPORTANCE_FLOOR

    widths, residual = solve_column_widths(w0, saliency, float(target_w))
    out = _resample_columns(img, w0, widths, target_w)
    return out, {
        "kkt_residual": residual,
        "constraint_residual": float(abs(widths.sum() - target_w)),
        "column_widths": widths,
    }
