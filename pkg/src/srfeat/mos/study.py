"""Mean-opinion-score study: rater calibration, blinded randomized
presentation, score capture, and aggregation.

Each rater session starts with anchored calibration exemplars (low anchor
shown as score 1, high anchor as score 5), then a random permutation of
``images_per_rater x len(versions)`` rating items with version labels hidden
behind opaque stimulus tokens. Image-to-rater assignment is balanced so that
at study completion every (image, version) pair holds exactly
``raters_per_image`` records.

Persistence is an append-only JSONL event log; the in-memory index is derived
by replay, which keeps the raw study auditable.
"""

import json
import math
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConflictError, ConfigurationError, InputError, NoCapacityError

DEFAULT_VERSIONS = ("NN", "bicubic", "M_p", "M_pva", "M_pca", "M_pcsa",
                    "M_pcsva", "HR")


@dataclass(frozen=True)
class StudyPlan:
    image_ids: Tuple[str, ...]
    versions: Tuple[str, ...] = DEFAULT_VERSIONS
    images_per_rater: int = 20
    raters_per_image: int = 5
    calibration_low: int = 5
    calibration_high: int = 5
    anchor_low: str = "NN"
    anchor_high: str = "HR"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.image_ids:
            raise ConfigurationError("study plan needs at least one image")
        if len(set(self.image_ids)) != len(self.image_ids):
            raise ConfigurationError("duplicate image ids in plan")
        if not 0 < self.images_per_rater <= len(self.image_ids):
            raise ConfigurationError("images_per_rater out of range")
        if self.raters_per_image < 1:
            raise ConfigurationError("raters_per_image must be >= 1")
        for anchor in (self.anchor_low, self.anchor_high):
            if anchor not in self.versions:
                raise ConfigurationError(f"anchor version {anchor!r} not in versions")
        total = len(self.image_ids) * self.raters_per_image
        if total % self.images_per_rater:
            raise ConfigurationError(
                "images*raters_per_image must divide evenly into sessions of "
                f"images_per_rater items (got {total} / {self.images_per_rater})"
            )

    @property
    def total_sessions(self) -> int:
        return len(self.image_ids) * self.raters_per_image // self.images_per_rater

    @property
    def rating_items_per_session(self) -> int:
        return self.images_per_rater * len(self.versions)

    def to_dict(self) -> dict:
        return {
            "image_ids": list(self.image_ids),
            "versions": list(self.versions),
            "images_per_rater": self.images_per_rater,
            "raters_per_image": self.raters_per_image,
            "calibration_low": self.calibration_low,
            "calibration_high": self.calibration_high,
            "anchor_low": self.anchor_low,
            "anchor_high": self.anchor_high,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StudyPlan":
        return cls(
            image_ids=tuple(d["image_ids"]),
            versions=tuple(d["versions"]),
            images_per_rater=d["images_per_rater"],
            raters_per_image=d["raters_per_image"],
            calibration_low=d["calibration_low"],
            calibration_high=d["calibration_high"],
            anchor_low=d["anchor_low"],
            anchor_high=d["anchor_high"],
            seed=d.get("seed", 0),
        )


@dataclass(frozen=True)
class RatingRecord:
    rater_id: str
    image_id: str
    version: str
    score: int
    timestamp: float

    def to_dict(self) -> dict:
        return {"rater_id": self.rater_id, "image_id": self.image_id,
                "version": self.version, "score": self.score,
                "timestamp": self.timestamp}


@dataclass
class SessionItem:
    item_id: str
    kind: str  # "calibration" | "rating"
    image_id: str
    version: str
    anchor_score: Optional[int] = None
    token: str = ""


@dataclass
class Session:
    session_id: str
    rater_id: str
    items: List[SessionItem]
    answered: Dict[str, int] = field(default_factory=dict)

    @property
    def rating_items(self) -> List[SessionItem]:
        return [it for it in self.items if it.kind == "rating"]

    @property
    def progress(self) -> Tuple[int, int]:
        rated = sum(1 for it in self.rating_items if it.item_id in self.answered)
        return rated, len(self.rating_items)

    def next_item(self) -> Optional[SessionItem]:
        for item in self.items:
            if item.item_id not in self.answered:
                return item
        return None

    @property
    def done(self) -> bool:
        return self.next_item() is None


class Study:
    """In-memory study state with an optional append-only event log."""

    def __init__(self, plan: StudyPlan, log_path=None):
        self.plan = plan
        self.sessions: Dict[str, Session] = {}
        self.by_rater: Dict[str, str] = {}
        self.records: List[RatingRecord] = []
        self.remaining = {img: plan.raters_per_image for img in plan.image_ids}
        self.tokens: Dict[str, Tuple[str, str]] = {}  # token -> (image, version)
        self._rng = np.random.default_rng(plan.seed)
        self._lock = threading.RLock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path and self._log_path.exists():
            self._replay()

    # -- persistence ------------------------------------------------------

    def _append_event(self, event: dict) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def _replay(self) -> None:
        for line in self._log_path.read_text().splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["type"] == "session":
                self._restore_session(event)
            elif event["type"] == "score":
                session = self.sessions[event["session_id"]]
                session.answered[event["item_id"]] = event["score"]
                if event.get("record"):
                    self.records.append(RatingRecord(**event["record"]))

    def _restore_session(self, event: dict) -> None:
        items = [SessionItem(**it) for it in event["items"]]
        session = Session(session_id=event["session_id"],
                          rater_id=event["rater_id"], items=items)
        self.sessions[session.session_id] = session
        self.by_rater[session.rater_id] = session.session_id
        for item in items:
            if item.kind == "rating":
                self.tokens[item.token] = (item.image_id, item.version)
        for img in {it.image_id for it in items if it.kind == "rating"}:
            self.remaining[img] -= 1

    # -- session construction ---------------------------------------------

    def _assign_images(self) -> List[str]:
        open_images = [img for img, n in self.remaining.items() if n > 0]
        if len(open_images) < self.plan.images_per_rater:
            raise NoCapacityError(
                f"only {len(open_images)} images still need raters; "
                f"cannot assemble a session of {self.plan.images_per_rater}"
            )
        # favor the least-covered images so the final sessions stay feasible
        open_images.sort(key=lambda img: (-self.remaining[img], img))
        return open_images[: self.plan.images_per_rater]

    def create_session(self, rater_id: str) -> Session:
        """Create (or resume) the session for a rater.

        Calibration items come first: low-anchor exemplars shown with score 1,
        then high-anchor exemplars with score 5. Rating items are a seeded
        random permutation of every (assigned image, version) pair.
        """
        with self._lock:
            if rater_id in self.by_rater:
                return self.sessions[self.by_rater[rater_id]]
            plan = self.plan
            images = self._assign_images()
            session_id = uuid.uuid4().hex
            items: List[SessionItem] = []
            calib_pool = list(plan.image_ids)
            n_low, n_high = plan.calibration_low, plan.calibration_high
            calib_imgs = [calib_pool[i % len(calib_pool)]
                          for i in range(max(n_low, n_high))]
            for i in range(n_low):
                items.append(SessionItem(
                    item_id=f"{session_id}-c{i}", kind="calibration",
                    image_id=calib_imgs[i], version=plan.anchor_low,
                    anchor_score=1, token=uuid.uuid4().hex,
                ))
            for i in range(n_high):
                items.append(SessionItem(
                    item_id=f"{session_id}-c{n_low + i}", kind="calibration",
                    image_id=calib_imgs[i], version=plan.anchor_high,
                    anchor_score=5, token=uuid.uuid4().hex,
                ))
            pairs = [(img, ver) for img in images for ver in plan.versions]
            order = self._rng.permutation(len(pairs))
            for rank, idx in enumerate(order):
                img, ver = pairs[idx]
                items.append(SessionItem(
                    item_id=f"{session_id}-r{rank}", kind="rating",
                    image_id=img, version=ver, token=uuid.uuid4().hex,
                ))
            session = Session(session_id=session_id, rater_id=rater_id,
                              items=items)
            self.sessions[session_id] = session
            self.by_rater[rater_id] = session_id
            for img in images:
                self.remaining[img] -= 1
            for item in items:
                if item.kind == "rating":
                    self.tokens[item.token] = (item.image_id, item.version)
            self._append_event({
                "type": "session", "session_id": session_id,
                "rater_id": rater_id,
                "items": [vars(it) for it in items],
            })
            return session

    # -- scoring ----------------------------------------------------------

    def submit_score(self, session_id: str, item_id: str, score: int) -> dict:
        """Persist one score; idempotent for identical retries.

        Calibration items accept any acknowledgement score and produce no
        rating record. Returns an acknowledgement dict.
        """
        if not isinstance(score, int) or isinstance(score, bool):
            raise InputError("score must be an integer")
        if not 1 <= score <= 5:
            raise InputError(f"score {score} outside 1..5")
        with self._lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise InputError(f"unknown session {session_id}")
            item = next((it for it in session.items if it.item_id == item_id),
                        None)
            if item is None:
                raise InputError(f"item {item_id} not in session")
            if item.item_id in session.answered:
                if session.answered[item.item_id] == score:
                    return self._ack(session, item, duplicate=True)
                raise ConflictError(
                    f"item {item_id} already answered with "
                    f"{session.answered[item.item_id]}"
                )
            record = None
            if item.kind == "rating":
                record = RatingRecord(
                    rater_id=session.rater_id, image_id=item.image_id,
                    version=item.version, score=score, timestamp=time.time(),
                )
            event = {
                "type": "score", "session_id": session_id, "item_id": item_id,
                "score": score,
                "record": record.to_dict() if record else None,
            }
            # durable before acknowledgement
            self._append_event(event)
            session.answered[item.item_id] = score
            if record:
                self.records.append(record)
            return self._ack(session, item, duplicate=False)

    @staticmethod
    def _ack(session: Session, item: SessionItem, duplicate: bool) -> dict:
        rated, total = session.progress
        return {
            "status": "duplicate" if duplicate else "stored",
            "item_id": item.item_id,
            "progress": {"answered": rated, "total": total},
            "done": session.done,
        }

    # -- aggregation --------------------------------------------------------

    def aggregate(self) -> List[dict]:
        """Per-version mean opinion scores with 95% normal-approximation CIs.

        Versions with no records are absent from the result.
        """
        with self._lock:
            by_version: Dict[str, List[int]] = {}
            for record in self.records:
                by_version.setdefault(record.version, []).append(record.score)
        rows = []
        for version in self.plan.versions:
            scores = by_version.get(version)
            if not scores:
                continue
            arr = np.asarray(scores, dtype=np.float64)
            mean = float(arr.mean())
            n = len(arr)
            sd = float(arr.std(ddof=1)) if n > 1 else 0.0
            half = 1.96 * sd / math.sqrt(n) if n > 1 else 0.0
            rows.append({"version": version, "mos": mean, "n": n,
                         "ci95_low": mean - half, "ci95_high": mean + half})
        return rows

    def coverage(self) -> Dict[Tuple[str, str], int]:
        counts: Dict[Tuple[str, str], int] = {}
        for record in self.records:
            key = (record.image_id, record.version)
            counts[key] = counts.get(key, 0) + 1
        return counts


def aggregate_mos(records: Sequence[RatingRecord],
                  versions: Optional[Sequence[str]] = None) -> List[dict]:
    """Aggregate free-standing records (same output as Study.aggregate)."""
    order = list(versions) if versions else sorted({r.version for r in records})
    by_version: Dict[str, List[int]] = {}
    for record in records:
        by_version.setdefault(record.version, []).append(record.score)
    rows = []
    for version in order:
        scores = by_version.get(version)
        if not scores:
            continue
        arr = np.asarray(scores, dtype=np.float64)
        mean = float(arr.mean())
        n = len(arr)
        sd = float(arr.std(ddof=1)) if n > 1 else 0.0
        half = 1.96 * sd / math.sqrt(n) if n > 1 else 0.0
        rows.append({"version": version, "mos": mean, "n": n,
                     "ci95_low": mean - half, "ci95_high": mean + half})
    return rows
