"""Low-level image features: dense-crop averaging and a handcrafted baseline descriptor.

The baseline descriptor (D=256) concatenates grid mean colors, grid gradient
orientation histograms, a joint RGB histogram, and grid luminance variances.
Externally computed features can be imported from the binary feature file
format instead.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import imaging

CROP_SIZE = 224
DENSE_CROP_COUNT = 10
BASELINE_DIM = 256
GRID = 4
ORIENT_BINS = 8
RGB_HIST_BINS = 4

FEATURE_MAGIC = b"RTFT"
FEATURE_VERSION = 1


class FeatureError(Exception):
    pass


@dataclass(frozen=True)
class ExtractorSpec:
    kind: str = "baseline"  # baseline | imported
    crop_policy: str = "dense_crop_K10"  # dense_crop_K10 | single_resize

    def __post_init__(self):
        if self.kind not in ("baseline", "imported"):
            raise FeatureError(f"unknown extractor kind {self.kind!r}")
        if self.crop_policy not in ("dense_crop_K10", "single_resize"):
            raise FeatureError(f"unknown crop policy {self.crop_policy!r}")

    @property
    def n_crops(self) -> int:
        return 1 if self.crop_policy == "single_resize" else DENSE_CROP_COUNT


def _sample_window(img: np.ndarray, fx: float, fy: float, size: int) -> np.ndarray:
    """size x size window at a possibly fractional offset, bilinear sampled."""
    if float(fx).is_integer() and float(fy).is_integer():
        x, y = int(fx), int(fy)
        return img[y : y + size, x : x + size].copy()
    xs = np.clip(fx + np.arange(size), 0.0, img.shape[1] - 1.0)
    ys = np.clip(fy + np.arange(size), 0.0, img.shape[0] - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, img.shape[1] - 1)
    y1 = np.minimum(y0 + 1, img.shape[0] - 1)
    wx = (xs - x0)[None, :, None]
    wy = (ys - y0)[:, None, None]
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def dense_crops(img: np.ndarray) -> list[np.ndarray]:
    """K=10 crops: short side scaled to 224, 4 corners + center, each plus its mirror."""
    img = imaging.as_image(img)
    if img.shape[0] < 8 or img.shape[1] < 8:
        raise FeatureError("image must be at least 8x8")
    h, w = img.shape[:2]
    if w >= h:
        scaled = imaging.uniform_scale(img, round(w * CROP_SIZE / h), CROP_SIZE)
    else:
        scaled = imaging.uniform_scale(img, CROP_SIZE, round(h * CROP_SIZE / w))
    sh, sw = scaled.shape[:2]
    mx, my = sw - CROP_SIZE, sh - CROP_SIZE
    # center at the exact (possibly half-pixel) offset keeps the set mirror-closed
    positions = [(0.0, 0.0), (float(mx), 0.0), (0.0, float(my)), (float(mx), float(my)),
                 (mx / 2.0, my / 2.0)]
    crops = []
    for fx, fy in positions:
        window = _sample_window(scaled, fx, fy, CROP_SIZE)
        crops.append(window)
        crops.append(window[:, ::-1].copy())
    return crops


def single_resize(img: np.ndarray) -> list[np.ndarray]:
    """One anisotropic resize of the whole image to 224 x 224 (ablation path)."""
    img = imaging.as_image(img)
    return [imaging.uniform_scale(img, CROP_SIZE, CROP_SIZE)]


def _grid_cells(arr: np.ndarray):
    h, w = arr.shape[:2]
    ys = np.linspace(0, h, GRID + 1).astype(int)
    xs = np.linspace(0, w, GRID + 1).astype(int)
    for i in range(GRID):
        for j in range(GRID):
            yield arr[ys[i] : ys[i + 1], xs[j] : xs[j + 1]]


def descriptor(crop: np.ndarray) -> np.ndarray:
    """256-dim baseline descriptor of a single crop."""
    crop = np.asarray(crop, dtype=np.float64)
    gray = imaging.to_gray(crop)
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)  # [-pi, pi]
    bins = np.minimum((ang + np.pi) / (2 * np.pi) * ORIENT_BINS, ORIENT_BINS - 1e-9).astype(int)

    parts = [np.array([cell.mean(axis=(0, 1)) for cell in _grid_cells(crop)]).ravel()]

    hog = []
    for cell_bins, cell_mag in zip(_grid_cells(bins), _grid_cells(mag)):
        hist = np.bincount(cell_bins.ravel(), weights=cell_mag.ravel(), minlength=ORIENT_BINS)
        total = hist.sum()
        hog.append(hist / total if total > 0 else hist)
    parts.append(np.concatenate(hog))

    q = np.minimum((crop * RGB_HIST_BINS).astype(int), RGB_HIST_BINS - 1)
    codes = (q[..., 0] * RGB_HIST_BINS + q[..., 1]) * RGB_HIST_BINS + q[..., 2]
    parts.append(np.bincount(codes.ravel(), minlength=RGB_HIST_BINS**3) / codes.size)

    parts.append(np.array([cell.var() for cell in _grid_cells(gray)]))

    vec = np.concatenate(parts)
    assert vec.size == BASELINE_DIM
    return vec


def extract(img: np.ndarray, spec: ExtractorSpec = ExtractorSpec()) -> np.ndarray:
    """Crop-averaged feature vector for one image."""
    if spec.kind != "baseline":
        raise FeatureError("extract() only computes baseline features; use import_features")
    crops = single_resize(img) if spec.crop_policy == "single_resize" else dense_crops(img)
    return np.mean([descriptor(c) for c in crops], axis=0)


# --------------------------------------------------------------- feature files


def export_features(path: str, table: dict[str, np.ndarray]) -> None:
    """Write an id -> vector table in the binary feature file format."""
    if not table:
        raise FeatureError("empty feature table")
    dims = {v.size for v in table.values()}
    if len(dims) != 1:
        raise FeatureError(f"inconsistent dims {sorted(dims)}")
    d = dims.pop()
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<III", FEATURE_VERSION, d, len(table)))
        for image_id, vec in table.items():
            raw = image_id.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(np.asarray(vec, dtype="<f4").tobytes())


def import_features(path: str) -> dict[str, np.ndarray]:
    """Load a feature file; dims must agree, ids must be unique, values finite."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != FEATURE_MAGIC:
        raise FeatureError("bad magic, not a feature file")
    version, d, n = struct.unpack_from("<III", data, 4)
    if version != FEATURE_VERSION:
        raise FeatureError(f"unsupported version {version}")
    offset = 16
    table: dict[str, np.ndarray] = {}
    for index in range(n):
        try:
            (id_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            image_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            vec = np.frombuffer(data, dtype="<f4", count=d, offset=offset).astype(np.float64)
            offset += 4 * d
        except (struct.error, ValueError) as exc:
            raise FeatureError(f"truncated record {index}: {exc}") from exc
        if vec.size != d:
            raise FeatureError(f"record {index}: dim {vec.size} != {d}")
        if image_id in table:
            raise FeatureError(f"record {index}: duplicate id {image_id!r}")
        if not np.isfinite(vec).all():
            raise FeatureError(f"record {index}: non-finite value")
        table[image_id] = vec
    return table
