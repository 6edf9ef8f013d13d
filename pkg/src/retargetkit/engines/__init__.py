"""Retargeting engine dispatch: multi-operator, axis-aligned warp, shift-map, crop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import imaging
from .aad import aad_warp
from .cropopt import crop_optimal
from .multiop import multi_operator
from .seam import seam_carve
from .shiftmap import shift_map

ENGINE_IDS = ("multi_operator", "aad_warp", "shift_map", "crop")
MIN_TARGET = 8


class EngineError(Exception):
    pass


@dataclass(frozen=True)
class RetargetJob:
    source: np.ndarray
    importance: np.ndarray
    engine: str
    target_width: int
    target_height: int

    def validate(self) -> None:
        h, w = self.source.shape[:2]
        if self.engine not in ENGINE_IDS:
            raise EngineError(f"unknown engine {self.engine!r}, expected one of {ENGINE_IDS}")
        if self.importance.shape != (h, w):
            raise EngineError("importance map does not match source dimensions")
        if self.target_width != w and self.target_height != h:
            raise EngineError("only one dimension may change per job")
        if (self.target_width, self.target_height) != (w, h):
            changed = self.target_width if self.target_width != w else self.target_height
            if changed < MIN_TARGET:
                raise EngineError(f"target dimension {changed} below minimum {MIN_TARGET}")


@dataclass(frozen=True)
class RetargetOutcome:
    result: np.ndarray
    engine: str
    diagnostics: dict = field(default_factory=dict)


def _transposed(fn, img, imp, target_h):
    out, diag = fn(img.transpose(1, 0, 2), imp.T, target_h)
    return out.transpose(1, 0, 2), diag


def retarget(job: RetargetJob) -> RetargetOutcome:
    """Run the job's engine; the result matches the target dimensions exactly."""
    job.validate()
    img = imaging.as_image(job.source)
    imp = np.asarray(job.importance, dtype=np.float64)
    h, w = img.shape[:2]
    tw, th = job.target_width, job.target_height

    if (tw, th) == (w, h):
        return RetargetOutcome(img.copy(), job.engine, {"identity": True})

    try:
        if job.engine == "crop":
            out, diag = crop_optimal(img, imp, tw, th)
        elif job.engine == "aad_warp":
            out, diag = aad_warp(img, imp, tw, th)
        elif job.engine == "shift_map":
            if tw != w:
                out, diag = shift_map(img, imp, tw)
            else:
                out, diag = _transposed(shift_map, img, imp, th)
        else:  # multi_operator
            if tw != w:
                out, diag = multi_operator(img, imp, tw)
            else:
                out, diag = _transposed(multi_operator, img, imp, th)
    except EngineError:
        raise
    except Exception as exc:
        raise EngineError(f"engine {job.engine} failed: {exc}") from exc

    if out.shape[:2] != (th, tw):
        raise EngineError(
            f"engine {job.engine} produced {out.shape[1]}x{out.shape[0]}, wanted {tw}x{th}"
        )
    return RetargetOutcome(out, job.engine, diag)


__all__ = [
    "ENGINE_IDS",
    "EngineError",
    "RetargetJob",
    "RetargetOutcome",
    "aad_warp",
    "crop_optimal",
    "multi_operator",
    "retarget",
    "seam_carve",
    "shift_map",
]
