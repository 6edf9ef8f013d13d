"""HTTP annotation service for blind rating and paired-comparison studies.

Serves originals plus method-anonymized retargeted variants, records
three-level ratings, 14-attribute tags, and pairwise votes with hidden
vigilance trials, and persists everything to an append-only JSON-lines
event log that can be replayed into identical aggregate state.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from . import imaging
from .annotstats import LEVELS, METHODS, N_ATTRIBUTES, RatingRecord

VIGILANCE_PERIOD = 10
VIGILANCE_FAILURE_LIMIT = 0.5
CHOICES = ("left", "right", "comparable")


class ServiceError(Exception):
    status = 500
    code = "internal"


class NotFoundError(ServiceError):
    status = 404
    code = "not_found"


class ValidationFailure(ServiceError):
    status = 422
    code = "validation"


class ConflictError(ServiceError):
    status = 409
    code = "conflict"


def _seed_for(*parts: str) -> int:
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class RaterState:
    ratings: Dict[str, Dict[str, str]] = field(default_factory=dict)  # image -> method -> level
    attributes: Dict[str, Tuple[int, ...]] = field(default_factory=dict)
    votes: List[dict] = field(default_factory=list)
    vigilance_total: int = 0
    vigilance_failed: int = 0

    @property
    def invalid(self) -> bool:
        if self.vigilance_total == 0:
            return False
        return self.vigilance_failed / self.vigilance_total > VIGILANCE_FAILURE_LIMIT


class AnnotationStore:
    """In-memory aggregate state backed by an append-only event log.

    All writes go through a single lock so concurrent submissions never
    interleave partial record batches.
    """

    def __init__(
        self,
        images: Dict[str, np.ndarray],
        variants: Dict[str, Dict[str, np.ndarray]],
        raters: Sequence[str],
        log_path: Optional[str] = None,
    ):
        for img_id, by_method in variants.items():
            if set(by_method) != set(METHODS):
                raise ValueError(f"{img_id}: variants must cover all four engines")
        self.images = images
        self.variants = variants
        self.image_ids = sorted(images)
        self.raters = {r: RaterState() for r in raters}
        self.log_path = log_path
        self._lock = threading.Lock()

    # -- event log -----------------------------------------------------

    def _append(self, events: List[dict]) -> None:
        """Atomically apply and persist a batch of events."""
        with self._lock:
            for ev in events:
                self._apply(ev)
            if self.log_path is not None:
                payload = "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in events)
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(payload)

    def _apply(self, ev: dict) -> None:
        state = self.raters[ev["rater"]]
        if ev["type"] == "rating":
            state.ratings.setdefault(ev["image_id"], {})[ev["method"]] = ev["level"]
        elif ev["type"] == "attributes":
            state.attributes[ev["image_id"]] = tuple(ev["flags"])
        elif ev["type"] == "vote":
            state.votes.append(ev)
            if ev["is_vigilance"]:
                state.vigilance_total += 1
                if ev["choice"] != "comparable":
                    state.vigilance_failed += 1
        else:
            raise ValueError(f"unknown event type {ev['type']!r}")

    def replay(self, log_path: str) -> None:
        """Rebuild aggregate state from a previously written event log."""
        with open(log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    self._apply(json.loads(line))

    # -- rating workflow ----------------------------------------------

    def _require_rater(self, rater: str) -> RaterState:
        if rater not in self.raters:
            raise NotFoundError(f"unknown rater {rater!r}")
        return self.raters[rater]

    def variant_order(self, rater: str, image_id: str) -> List[str]:
        """Per-(rater, image) seeded shuffle of the four methods."""
        rng = np.random.default_rng(_seed_for("variants", rater, image_id))
        return [METHODS[i] for i in rng.permutation(len(METHODS))]

    def _variant_key(self, rater: str, image_id: str, method: str) -> str:
        return hashlib.sha256(
            f"key|{rater}|{image_id}|{method}".encode("utf-8")
        ).hexdigest()[:16]

    def resolve_variant(self, rater: str, image_id: str, key: str) -> str:
        for m in METHODS:
            if self._variant_key(rater, image_id, m) == key:
                return m
        raise ValidationFailure(f"unknown variant key {key!r}")

    def next_task(self, rater: str) -> Optional[dict]:
        state = self._require_rater(rater)
        for image_id in self.image_ids:
            if len(state.ratings.get(image_id, {})) < len(METHODS):
                order = self.variant_order(rater, image_id)
                return {
                    "task_id": f"{rater}:{image_id}",
                    "image_id": image_id,
                    "original_url": f"/api/images/{image_id}",
                    "variants": [
                        {
                            "key": self._variant_key(rater, image_id, m),
                            "url": f"/api/images/{self._variant_key(rater, image_id, m)}",
                        }
                        for m in order
                    ],
                }
        return None

    def submit_rating(self, task_id: str, rater: str, levels: Dict[str, str]) -> int:
        state = self._require_rater(rater)
        try:
            task_rater, image_id = task_id.split(":", 1)
        except ValueError:
            raise ValidationFailure(f"malformed task id {task_id!r}")
        if task_rater != rater or image_id not in self.images:
            raise NotFoundError(f"unknown task {task_id!r}")
        if len(state.ratings.get(image_id, {})) >= len(METHODS):
            raise ConflictError(f"task {task_id!r} already submitted")
        if len(levels) != len(METHODS):
            raise ValidationFailure(f"expected {len(METHODS)} variant levels, got {len(levels)}")
        events = []
        now = time.time()
        for key, level in levels.items():
            if level not in LEVELS:
                raise ValidationFailure(f"invalid level {level!r}")
            method = self.resolve_variant(rater, image_id, key)
            events.append(
                {
                    "type": "rating",
                    "image_id": image_id,
                    "rater": rater,
                    "method": method,
                    "level": level,
                    "ts": now,
                }
            )
        if len({ev["method"] for ev in events}) != len(METHODS):
            raise ValidationFailure("each variant must be rated exactly once")
        self._append(events)
        return len(events)

    def submit_attributes(self, image_id: str, rater: str, flags: Sequence[int]) -> None:
        self._require_rater(rater)
        if image_id not in self.images:
            raise NotFoundError(f"unknown image {image_id!r}")
        flags = list(flags)
        if len(flags) != N_ATTRIBUTES or any(f not in (-1, 1) for f in flags):
            raise ValidationFailure(f"expected {N_ATTRIBUTES} flags, each +1 or -1")
        self._append(
            [
                {
                    "type": "attributes",
                    "image_id": image_id,
                    "rater": rater,
                    "flags": flags,
                    "ts": time.time(),
                }
            ]
        )

    # -- paired comparisons -------------------------------------------

    def _trial_for_position(self, rater: str, position: int) -> dict:
        """Deterministic trial content for a rater's 1-based trial position."""
        rng = np.random.default_rng(_seed_for("trial", rater, str(position)))
        image_id = self.image_ids[int(rng.integers(len(self.image_ids)))]
        is_vigilance = position % VIGILANCE_PERIOD == 0
        if is_vigilance:
            method = METHODS[int(rng.integers(len(METHODS)))]
            pair = (method, method)
        else:
            a, b = rng.choice(len(METHODS), size=2, replace=False)
            pair = (METHODS[int(a)], METHODS[int(b)])
        return {
            "trial_id": f"{rater}:{position}",
            "image_id": image_id,
            "position": position,
            "is_vigilance": is_vigilance,
            "methods": pair,
        }

    def next_comparison(self, rater: str) -> dict:
        state = self._require_rater(rater)
        position = len(state.votes) + 1
        trial = self._trial_for_position(rater, position)
        left = self._variant_key(rater, trial["image_id"], trial["methods"][0])
        right = self._variant_key(rater, trial["image_id"], trial["methods"][1])
        return {
            "trial_id": trial["trial_id"],
            "original_url": f"/api/images/{trial['image_id']}",
            "left_url": f"/api/images/{left}",
            "right_url": f"/api/images/{right}",
        }

    def submit_vote(self, trial_id: str, rater: str, choice: str) -> None:
        state = self._require_rater(rater)
        if choice not in CHOICES:
            raise ValidationFailure(f"invalid choice {choice!r}")
        try:
            trial_rater, pos_text = trial_id.split(":", 1)
            position = int(pos_text)
        except ValueError:
            raise ValidationFailure(f"malformed trial id {trial_id!r}")
        if trial_rater != rater or position < 1:
            raise NotFoundError(f"unknown trial {trial_id!r}")
        if position != len(state.votes) + 1:
            raise ConflictError(f"trial {trial_id!r} is not the rater's current trial")
        trial = self._trial_for_position(rater, position)
        self._append(
            [
                {
                    "type": "vote",
                    "rater": rater,
                    "trial_id": trial_id,
                    "image_id": trial["image_id"],
                    "methods": list(trial["methods"]),
                    "choice": choice,
                    "is_vigilance": trial["is_vigilance"],
                    "ts": time.time(),
                }
            ]
        )

    # -- exports -------------------------------------------------------

    def rating_records(self) -> List[RatingRecord]:
        out = []
        for rater, state in self.raters.items():
            for image_id, by_method in state.ratings.items():
                for method, level in by_method.items():
                    out.append(
                        RatingRecord(
                            image_id=image_id, method=method, rater_id=rater, level=level
                        )
                    )
        return out

    def exported_votes(self) -> List[dict]:
        """Non-vigilance votes from raters that passed vigilance screening."""
        out = []
        for rater, state in self.raters.items():
            if state.invalid:
                continue
            out.extend(v for v in state.votes if not v["is_vigilance"])
        return out

    def progress(self) -> dict:
        return {
            "images": len(self.image_ids),
            "raters": {
                rater: {
                    "rated_images": sum(
                        1
                        for image_id in self.image_ids
                        if len(state.ratings.get(image_id, {})) >= len(METHODS)
                    ),
                    "votes": len(state.votes),
                    "vigilance_failed": state.vigilance_failed,
                    "vigilance_total": state.vigilance_total,
                    "invalid": state.invalid,
                }
                for rater, state in self.raters.items()
            },
        }

    def image_png(self, key: str) -> bytes:
        if key in self.images:
            return imaging.encode_png(self.images[key])
        for rater in self.raters:
            for image_id in self.image_ids:
                for m in METHODS:
                    if self._variant_key(rater, image_id, m) == key:
                        return imaging.encode_png(self.variants[image_id][m])
        raise NotFoundError(f"unknown image {key!r}")


def create_app(store: AnnotationStore, static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="retargetkit annotation service")

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": str(exc)}
        )

    @app.get("/api/tasks/next")
    async def tasks_next(rater: str):
        task = store.next_task(rater)
        if task is None:
            return {"done": True}
        return task

    @app.post("/api/ratings")
    async def ratings(payload: dict):
        try:
            count = store.submit_rating(
                payload["task_id"], payload["rater"], payload["levels"]
            )
        except KeyError as exc:
            raise ValidationFailure(f"missing field {exc}")
        return {"appended": count}

    @app.post("/api/attributes")
    async def attributes(payload: dict):
        try:
            store.submit_attributes(payload["image_id"], payload["rater"], payload["flags"])
        except KeyError as exc:
            raise ValidationFailure(f"missing field {exc}")
        return {"ok": True}

    @app.get("/api/comparisons/next")
    async def comparisons_next(rater: str):
        return store.next_comparison(rater)

    @app.post("/api/votes")
    async def votes(payload: dict):
        try:
            store.submit_vote(payload["trial_id"], payload["rater"], payload["choice"])
        except KeyError as exc:
            raise ValidationFailure(f"missing field {exc}")
        return {"ok": True}

    @app.get("/api/images/{key}")
    async def image(key: str):
        return Response(content=store.image_png(key), media_type="image/png")

    @app.get("/api/progress")
    async def progress():
        return store.progress()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
