"""Raster image primitives: decode/encode, bilinear resampling, cropping, integral images.

Images are float64 arrays of shape (height, width, 3) with values in [0, 1].
All functions are pure; arrays are treated as immutable after construction.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, UnidentifiedImageError


class ImageError(Exception):
    """Base error for image handling."""


class DecodeError(ImageError):
    """Raised when an encoded image cannot be decoded."""


class BoundsError(ImageError):
    """Raised when a window falls outside the image."""


def as_image(data: np.ndarray) -> np.ndarray:
    """Validate and normalize an array into image form (H, W, 3) float64 in [0, 1]."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ImageError(f"expected (H, W, 3) array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError(f"image must be at least 1x1, got shape {arr.shape}")
    if np.nanmin(arr) < 0.0 or np.nanmax(arr) > 1.0 or not np.isfinite(arr).all():
        raise ImageError("intensities must be finite and within [0, 1]")
    return arr


def decode_image(data: bytes) -> np.ndarray:
    """Decode PNG or JPEG bytes to a float image; 8-bit value v maps to v/255."""
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    if pil.format not in ("PNG", "JPEG"):
        raise DecodeError(f"unsupported format {pil.format!r}, expected PNG or JPEG")
    if pil.mode not in ("RGB", "L", "LA", "RGBA", "P", "1"):
        raise DecodeError(f"unsupported image mode {pil.mode!r}")
    rgb = pil.convert("RGB")
    return np.asarray(rgb, dtype=np.float64) / 255.0


def encode_png(img: np.ndarray) -> bytes:
    """Encode a float image to 8-bit RGB PNG bytes (values rounded to v*255)."""
    img = as_image(img)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_gray(data: bytes) -> np.ndarray:
    """Decode an 8-bit grayscale PNG to a (H, W) float array, v/255."""
    try:
        pil = Image.open(io.BytesIO(data))
        pil.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    gray = pil.convert("L")
    return np.asarray(gray, dtype=np.float64) / 255.0


def _sample_axis(length_out: int, length_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bilinear sample positions mapping output pixel centers into source coordinates."""
    # align pixel centers: out center (i + 0.5) maps to src (i + 0.5) * scale
    scale = length_in / length_out
    pos = (np.arange(length_out) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, length_in - 1.0)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, length_in - 1)
    frac = pos - lo
    return lo, hi, frac


def uniform_scale(img: np.ndarray, w: int, h: int) -> np.ndarray:
    """Resample an image to exactly w x h with separable bilinear interpolation."""
    img = as_image(img)
    if w < 1 or h < 1:
        raise ImageError(f"target size must be >= 1, got {w}x{h}")
    if img.shape[1] == w and img.shape[0] == h:
        return img
    xlo, xhi, xf = _sample_axis(w, img.shape[1])
    ylo, yhi, yf = _sample_axis(h, img.shape[0])
    rows = img[:, xlo] * (1.0 - xf)[None, :, None] + img[:, xhi] * xf[None, :, None]
    out = rows[ylo] * (1.0 - yf)[:, None, None] + rows[yhi] * yf[:, None, None]
    return out


def scale_long_side(img: np.ndarray, target: int) -> np.ndarray:
    """Scale so the long side equals target, preserving aspect ratio (bilinear)."""
    img = as_image(img)
    if target < 1:
        raise ImageError(f"target must be >= 1, got {target}")
    h, w = img.shape[:2]
    long_side = max(w, h)
    if long_side == target:
        return img
    ratio = target / long_side
    if w >= h:
        return uniform_scale(img, target, max(1, round(h * ratio)))
    return uniform_scale(img, max(1, round(w * ratio)), target)


def crop_window(img: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
    """Copy the window [x, x+w) x [y, y+h); the window must lie inside the image."""
    img = as_image(img)
    if w < 1 or h < 1:
        raise BoundsError(f"window size must be >= 1, got {w}x{h}")
    if x < 0 or y < 0 or x + w > img.shape[1] or y + h > img.shape[0]:
        raise BoundsError(
            f"window ({x},{y},{w},{h}) outside image {img.shape[1]}x{img.shape[0]}"
        )
    return img[y : y + h, x : x + w].copy()


def integral_image(field: np.ndarray) -> np.ndarray:
    """Summed-area table of a scalar field, with a zero top/left border row/column."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ImageError(f"expected 2-D field, got shape {field.shape}")
    out = np.zeros((field.shape[0] + 1, field.shape[1] + 1))
    np.cumsum(np.cumsum(field, axis=0), axis=1, out=out[1:, 1:])
    return out


def integral_query(ii: np.ndarray, x: int, y: int, w: int, h: int) -> float:
    """Sum of the field over the window [x, x+w) x [y, y+h)."""
    return float(ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x])


def to_gray(img: np.ndarray) -> np.ndarray:
    """Channel-mean luminance as a (H, W) array."""
    return np.asarray(img, dtype=np.float64).mean(axis=2)
