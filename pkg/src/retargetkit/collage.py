"""Retargetability-guided photo collage.

Builds a seeded slicing-tree layout, assigns images to regions in
ascending retargetability order (hardest images get the best-fitting
aspect ratios), and fills each region by scale-to-cover followed by a
single-axis retarget with the suggested engine.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import imaging
from .engines import RetargetJob, retarget
from .methodsel import MethodClassifier, suggest_method

MIN_REGION_SIDE = 16


class CollageError(Exception):
    """Layout, assignment, or rendering failure."""


@dataclass(frozen=True)
class Region:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def aspect(self) -> float:
        return self.w / self.h


@dataclass
class CollageLayout:
    canvas_w: int
    canvas_h: int
    regions: List[Region]
    assignment: Dict[int, str]  # region index -> image id

    def validate_tiling(self) -> None:
        cover = np.zeros((self.canvas_h, self.canvas_w), dtype=np.int32)
        for r in self.regions:
            if r.x < 0 or r.y < 0 or r.x + r.w > self.canvas_w or r.y + r.h > self.canvas_h:
                raise CollageError(f"region {r} exceeds the canvas")
            cover[r.y : r.y + r.h, r.x : r.x + r.w] += 1
        if not np.all(cover == 1):
            raise CollageError("regions do not tile the canvas exactly")


def slice_layout(canvas_w: int, canvas_h: int, n: int, seed: int = 0) -> List[Region]:
    """Recursive binary slicing into ``n`` regions.

    The largest-area region is split alternately vertical / horizontal at
    a seeded ratio drawn uniformly from [0.35, 0.65]; every cut lands on
    integer pixels so the tiling stays exact.
    """
    if n < 1:
        raise CollageError("need at least one region")
    if canvas_w * canvas_h < n * MIN_REGION_SIDE * MIN_REGION_SIDE:
        raise CollageError(f"canvas too small for {n} regions of >= {MIN_REGION_SIDE} px side")
    rng = np.random.default_rng(seed)
    regions = [Region(0, 0, canvas_w, canvas_h)]
    vertical = True
    while len(regions) < n:
        idx = max(range(len(regions)), key=lambda i: regions[i].area)
        r = regions.pop(idx)
        ratio = float(rng.uniform(0.35, 0.65))
        if vertical:
            cut = int(round(r.w * ratio))
            cut = min(max(cut, MIN_REGION_SIDE), r.w - MIN_REGION_SIDE)
            if cut < MIN_REGION_SIDE or r.w - cut < MIN_REGION_SIDE:
                raise CollageError("canvas too small: a split would violate the minimum side")
            parts = [Region(r.x, r.y, cut, r.h), Region(r.x + cut, r.y, r.w - cut, r.h)]
        else:
            cut = int(round(r.h * ratio))
            cut = min(max(cut, MIN_REGION_SIDE), r.h - MIN_REGION_SIDE)
            if cut < MIN_REGION_SIDE or r.h - cut < MIN_REGION_SIDE:
                raise CollageError("canvas too small: a split would violate the minimum side")
            parts = [Region(r.x, r.y, r.w, cut), Region(r.x, r.y + cut, r.w, r.h - cut)]
        regions[idx:idx] = parts
        vertical = not vertical
    if any(r.w < MIN_REGION_SIDE or r.h < MIN_REGION_SIDE for r in regions):
        raise CollageError("layout produced a region below the minimum side")
    return regions


def _aspect_mismatch(image_ar: float, region_ar: float) -> float:
    return abs(math.log(image_ar / region_ar))


def assign_by_retargetability(
    image_ids: Sequence[str],
    scores: Dict[str, float],
    aspects: Dict[str, float],
    regions: Sequence[Region],
    shuffled_seed: Optional[int] = None,
) -> Dict[int, str]:
    """Greedy assignment: ascending score, best log-aspect fit first.

    With ``shuffled_seed`` set the assignment is instead a seeded random
    permutation — the "ignore retargetability" comparison baseline.
    """
    if len(image_ids) != len(regions):
        raise CollageError("image count must equal region count")
    if shuffled_seed is not None:
        perm = np.random.default_rng(shuffled_seed).permutation(len(regions))
        return {int(perm[k]): img_id for k, img_id in enumerate(image_ids)}
    order = sorted(image_ids, key=lambda i: (scores[i], i))
    free = list(range(len(regions)))
    assignment: Dict[int, str] = {}
    for img_id in order:
        pick = min(free, key=lambda j: (_aspect_mismatch(aspects[img_id], regions[j].aspect), j))
        free.remove(pick)
        assignment[pick] = img_id
    return assignment


def _fill_region(
    img: np.ndarray,
    imp: np.ndarray,
    region: Region,
    engine: str,
) -> np.ndarray:
    """Scale-to-cover the region, then retarget the overflowing axis."""
    h, w = img.shape[:2]
    scale = max(region.w / w, region.h / h)
    sw = max(region.w, int(round(w * scale)))
    sh = max(region.h, int(round(h * scale)))
    scaled = imaging.uniform_scale(img, sw, sh)
    scaled_imp = imaging.uniform_scale(np.repeat(imp[:, :, None], 3, axis=2), sw, sh)[:, :, 0]
    if (sw, sh) == (region.w, region.h):
        return scaled
    job = RetargetJob(
        source=scaled,
        importance=np.clip(scaled_imp, 0.0, 1.0),
        engine=engine,
        target_width=region.w,
        target_height=region.h,
    )
    return retarget(job).result


def render_collage(
    layout: CollageLayout,
    images: Dict[str, np.ndarray],
    importance: Dict[str, np.ndarray],
    classifiers: Optional[Dict[str, MethodClassifier]] = None,
    shared_reprs: Optional[Dict[str, np.ndarray]] = None,
) -> np.ndarray:
    """Compose the canvas; each region is filled by its assigned image.

    The engine per region comes from the method-selection classifiers when
    both classifiers and shared representations are available, otherwise
    content-aware cropping is used.
    """
    layout.validate_tiling()
    if set(layout.assignment) != set(range(len(layout.regions))):
        raise CollageError("assignment must cover every region exactly once")
    canvas = np.zeros((layout.canvas_h, layout.canvas_w, 3), dtype=np.float64)
    for idx, region in enumerate(layout.regions):
        img_id = layout.assignment[idx]
        engine = "crop"
        if classifiers is not None and shared_reprs is not None and img_id in shared_reprs:
            engine = suggest_method(classifiers, shared_reprs[img_id])
        try:
            tile = _fill_region(images[img_id], importance[img_id], region, engine)
        except Exception as exc:
            raise CollageError(
                f"region {idx} ({region.w}x{region.h} at {region.x},{region.y}), "
                f"image {img_id!r}, engine {engine}: {exc}"
            ) from exc
        canvas[region.y : region.y + region.h, region.x : region.x + region.w] = tile
    return canvas


def layout_to_json(layout: CollageLayout) -> str:
    payload = {
        "canvas": {"w": layout.canvas_w, "h": layout.canvas_h},
        "regions": [
            {"x": r.x, "y": r.y, "w": r.w, "h": r.h, "image_id": layout.assignment.get(i)}
            for i, r in enumerate(layout.regions)
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2)


def layout_from_json(text: str) -> CollageLayout:
    try:
        payload = json.loads(text)
        canvas = payload["canvas"]
        regions = [Region(r["x"], r["y"], r["w"], r["h"]) for r in payload["regions"]]
        assignment = {
            i: r["image_id"] for i, r in enumerate(payload["regions"]) if r.get("image_id")
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise CollageError(f"malformed layout JSON: {exc}") from exc
    layout = CollageLayout(int(canvas["w"]), int(canvas["h"]), regions, assignment)
    layout.validate_tiling()
    return layout
