"""Human annotation backend.

Serves subtitle labeling tasks in manifest order, records single-keypress
labels per annotator, and exports per-annotator manifests plus the consensus
layer and agreement statistics. State is an append-only line-delimited event
log; replaying it reconstructs identical exports, so there is no database.

Designed for the two-annotator, desk-scale workflow: one process, writes
serialized under a lock, reads seeing consistent snapshots.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import BaseModel

from .corpus import ClipRecord, LabelProvenance, LabelSource, record_to_dict
from .evaluation import consensus_subset, gwet_ac1
from .labels import EmotionLabel

log = logging.getLogger(__name__)

# One key per emotion; fixed, never remapped client-side.
KEYMAP: dict[str, EmotionLabel] = {
    "a": EmotionLabel.ANGER,
    "d": EmotionLabel.DISGUST,
    "f": EmotionLabel.FEAR,
    "j": EmotionLabel.JOY,
    "n": EmotionLabel.NEUTRAL,
    "s": EmotionLabel.SADNESS,
    "u": EmotionLabel.SURPRISE,
}

DEFAULT_CONTEXT_WINDOW = 2


@dataclass
class AnnotationTask:
    clip_id: str
    subtitle_text: str
    context_before: list[str] = field(default_factory=list)
    context_after: list[str] = field(default_factory=list)
    video_url: str | None = None

    def __post_init__(self) -> None:
        if not self.subtitle_text:
            raise ValueError(f"task {self.clip_id!r}: subtitle_text must be non-empty")

    def to_dict(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "subtitle_text": self.subtitle_text,
            "context_before": self.context_before,
            "context_after": self.context_after,
            "video_url": self.video_url,
        }


@dataclass
class AnnotationEvent:
    clip_id: str
    annotator_id: str
    label: EmotionLabel
    key_pressed: str
    timestamp: float = 0.0
    attempt: int = 0

    def __post_init__(self) -> None:
        if self.key_pressed not in KEYMAP:
            raise ValueError(
                f"key {self.key_pressed!r} is not mapped; valid keys: "
                + ", ".join(f"{k} -> {v.value}" for k, v in KEYMAP.items())
            )
        if KEYMAP[self.key_pressed] is not self.label:
            raise ValueError(
                f"key {self.key_pressed!r} maps to {KEYMAP[self.key_pressed].value}, not {self.label.value}"
            )


class AnnotationError(Exception):
    """Request-level failure; status picks the HTTP code."""

    def __init__(self, status: int, detail: str, extra: dict | None = None):
        super().__init__(detail)
        self.status = status
        self.detail = detail
        self.extra = extra or {}


def _session_token(annotator_id: str) -> str:
    # Light session handle, not an auth system: stable per annotator id.
    return hashlib.sha256(f"signemo-session:{annotator_id}".encode("utf-8")).hexdigest()[:16]


def tasks_from_records(
    records: list[ClipRecord],
    media_dir: Path | None = None,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
) -> list[AnnotationTask]:
    """Build the task queue: manifest order, neighboring subtitles as context."""
    subtitled = [r for r in records if r.subtitle_text]
    skipped = len(records) - len(subtitled)
    if skipped:
        log.warning("skipping %d records without subtitle text", skipped)
    tasks = []
    for i, rec in enumerate(subtitled):
        video_url = None
        if media_dir is not None:
            candidate = media_dir / Path(rec.video_path).name
            if candidate.is_file():
                video_url = f"/media/{candidate.name}"
        tasks.append(
            AnnotationTask(
                clip_id=rec.clip_id,
                subtitle_text=rec.subtitle_text or "",
                context_before=[r.subtitle_text or "" for r in subtitled[max(0, i - context_window) : i]],
                context_after=[r.subtitle_text or "" for r in subtitled[i + 1 : i + 1 + context_window]],
                video_url=video_url,
            )
        )
    return tasks


class AnnotationStore:
    """All mutable service state plus the event log behind a single lock."""

    def __init__(
        self,
        records: list[ClipRecord],
        log_path: str | Path,
        annotators: list[str] | None = None,
        media_dir: str | Path | None = None,
        context_window: int = DEFAULT_CONTEXT_WINDOW,
    ):
        self._lock = threading.Lock()
        self.records = {r.clip_id: r for r in records}
        self.media_dir = Path(media_dir) if media_dir is not None else None
        self.tasks = tasks_from_records(records, self.media_dir, context_window)
        self.task_index = {t.clip_id: i for i, t in enumerate(self.tasks)}
        self.allowed = set(annotators) if annotators else None
        self.log_path = Path(log_path)
        self.sessions: dict[str, str] = {}  # annotator_id -> token
        self.events: dict[str, dict[str, AnnotationEvent]] = {}  # annotator -> clip -> event
        self.served: dict[str, set[str]] = {}
        self.attempts: dict[tuple[str, str, int], str] = {}  # (annotator, clip, attempt) -> key
        self.audit: list[dict] = []  # relabel flags, in arrival order
        if self.log_path.exists():
            self._replay()

    # -- event log ----------------------------------------------------------

    def _append(self, obj: dict) -> None:
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, sort_keys=True))
            fh.write("\n")

    def _replay(self) -> None:
        with self.log_path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{self.log_path}:{line_no}: corrupt event log ({exc})") from None
                self._apply(obj, replay=True)
        log.info("replayed %s: %d annotators, %d labels", self.log_path,
                 len(self.sessions), sum(len(v) for v in self.events.values()))

    def _apply(self, obj: dict, replay: bool) -> None:
        kind = obj.get("type")
        if kind == "session":
            annotator = obj["annotator_id"]
            self.sessions[annotator] = obj["token"]
            self.events.setdefault(annotator, {})
            self.served.setdefault(annotator, set())
        elif kind == "label":
            event = AnnotationEvent(
                clip_id=obj["clip_id"],
                annotator_id=obj["annotator_id"],
                label=EmotionLabel(obj["label"]),
                key_pressed=obj["key_pressed"],
                timestamp=obj.get("timestamp", 0.0),
                attempt=obj.get("attempt", 0),
            )
            per = self.events.setdefault(event.annotator_id, {})
            if obj.get("relabel"):
                self.audit.append({"annotator_id": event.annotator_id, "clip_id": event.clip_id,
                                   "attempt": event.attempt, "label": event.label.value})
            per[event.clip_id] = event
            # a persisted label implies the task was served before the write
            self.served.setdefault(event.annotator_id, set()).add(event.clip_id)
            self.attempts[(event.annotator_id, event.clip_id, event.attempt)] = event.key_pressed
        else:
            raise ValueError(f"unknown event type {kind!r} in {self.log_path}")

    # -- session and task flow ------------------------------------------------

    def register(self, annotator_id: str) -> dict:
        with self._lock:
            if self.allowed is not None and annotator_id not in self.allowed:
                raise AnnotationError(404, f"unknown annotator {annotator_id!r}")
            if annotator_id not in self.sessions:
                token = _session_token(annotator_id)
                self._append({"type": "session", "annotator_id": annotator_id, "token": token})
                self._apply({"type": "session", "annotator_id": annotator_id, "token": token}, replay=False)
            return {
                "annotator_id": annotator_id,
                "token": self.sessions[annotator_id],
                "progress": self._progress(annotator_id),
            }

    def _require_session(self, annotator_id: str) -> None:
        if annotator_id not in self.sessions:
            raise AnnotationError(404, f"unknown annotator {annotator_id!r}; register the session first")

    def _progress(self, annotator_id: str) -> dict:
        done = len(self.events.get(annotator_id, {}))
        return {"done": done, "total": len(self.tasks)}

    def next_task(self, annotator_id: str) -> dict:
        """Lowest-ordinal task this annotator has not labeled, or done."""
        with self._lock:
            self._require_session(annotator_id)
            labeled = self.events.get(annotator_id, {})
            for task in self.tasks:
                if task.clip_id not in labeled:
                    self.served.setdefault(annotator_id, set()).add(task.clip_id)
                    return {"done": False, "task": task.to_dict(), "progress": self._progress(annotator_id)}
            return {"done": True, "task": None, "progress": self._progress(annotator_id)}

    def submit(self, event: AnnotationEvent, token: str | None = None) -> dict:
        with self._lock:
            self._require_session(event.annotator_id)
            if token is not None and token != self.sessions[event.annotator_id]:
                raise AnnotationError(403, f"bad session token for {event.annotator_id!r}")
            if event.clip_id not in self.task_index:
                raise AnnotationError(404, f"unknown clip {event.clip_id!r}")
            if event.clip_id not in self.served.get(event.annotator_id, set()):
                raise AnnotationError(
                    409, f"clip {event.clip_id!r} was never served to {event.annotator_id!r}"
                )

            dedupe_key = (event.annotator_id, event.clip_id, event.attempt)
            if dedupe_key in self.attempts:
                if self.attempts[dedupe_key] != event.key_pressed:
                    raise AnnotationError(
                        409,
                        f"attempt {event.attempt} for clip {event.clip_id!r} was already "
                        f"recorded with a different key",
                    )
                stored = self.events[event.annotator_id][event.clip_id]
                return {
                    "stored": True,
                    "duplicate": True,
                    "relabeled": False,
                    "label": stored.label.value,
                    "progress": self._progress(event.annotator_id),
                }

            relabel = event.clip_id in self.events.get(event.annotator_id, {})
            obj = {
                "type": "label",
                "clip_id": event.clip_id,
                "annotator_id": event.annotator_id,
                "label": event.label.value,
                "key_pressed": event.key_pressed,
                "timestamp": event.timestamp,
                "attempt": event.attempt,
                "relabel": relabel,
            }
            self._append(obj)
            self._apply(obj, replay=False)
            return {
                "stored": True,
                "duplicate": False,
                "relabeled": relabel,
                "label": event.label.value,
                "progress": self._progress(event.annotator_id),
            }

    # -- export ---------------------------------------------------------------

    def export(self, annotator_ids: list[str] | None = None, partial: bool = False) -> dict:
        """Per-annotator manifest layers, consensus layer, and agreement.

        Refuses when a requested annotator has unlabeled tasks, unless partial
        is set. Consensus and AC1 need exactly two annotators; with any other
        count only the per-annotator layers are emitted.
        """
        with self._lock:
            ids = sorted(annotator_ids) if annotator_ids else sorted(self.sessions)
            if not ids:
                raise AnnotationError(409, "no annotator sessions to export")
            for annotator in ids:
                self._require_session(annotator)
            if not partial:
                remaining = {
                    a: len(self.tasks) - len(self.events.get(a, {}))
                    for a in ids
                    if len(self.events.get(a, {})) < len(self.tasks)
                }
                if remaining:
                    raise AnnotationError(
                        409,
                        "incomplete sessions: "
                        + ", ".join(f"{a} has {n} tasks remaining" for a, n in sorted(remaining.items())),
                        extra={"remaining": remaining},
                    )

            manifests: dict[str, list[dict]] = {}
            for annotator in ids:
                layer = []
                for task in self.tasks:
                    event = self.events.get(annotator, {}).get(task.clip_id)
                    if event is None:
                        continue
                    rec = self.records[task.clip_id].with_label(
                        event.label,
                        LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id=annotator),
                    )
                    layer.append(record_to_dict(rec))
                manifests[annotator] = layer

            out: dict = {
                "total_tasks": len(self.tasks),
                "annotators": ids,
                "manifests": manifests,
                "consensus": None,
                "agreement": None,
                "audit": list(self.audit),
            }
            if len(ids) == 2:
                a, b = ids
                labeled_records = []
                pairs_a, pairs_b, item_ids = [], [], []
                for task in self.tasks:
                    ev_a = self.events.get(a, {}).get(task.clip_id)
                    ev_b = self.events.get(b, {}).get(task.clip_id)
                    rec = self.records[task.clip_id]
                    if ev_a is not None:
                        rec = rec.with_label(
                            ev_a.label, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id=a)
                        )
                    if ev_b is not None:
                        rec = rec.with_label(
                            ev_b.label, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id=b)
                        )
                    labeled_records.append(rec)
                    if ev_a is not None and ev_b is not None:
                        pairs_a.append(ev_a.label)
                        pairs_b.append(ev_b.label)
                        item_ids.append(task.clip_id)
                consensus = consensus_subset(labeled_records, a, b)
                out["consensus"] = {
                    "records": [record_to_dict(r) for r in consensus.records],
                    "per_class_counts": {k.value: v for k, v in consensus.per_class_counts.items()},
                    "n": len(consensus.records),
                    "missing_ids": sorted(consensus.missing_ids),
                    "disagreement_ids": sorted(consensus.disagreement_ids),
                }
                if item_ids:
                    out["agreement"] = gwet_ac1(pairs_a, pairs_b, item_ids=item_ids).to_dict()
            return out


# ---------------------------------------------------------------------------
# HTTP layer

class LabelBody(BaseModel):
    clip_id: str
    annotator_id: str
    key_pressed: str
    label: str | None = None
    timestamp: float = 0.0
    attempt: int = 0
    token: str | None = None


def create_app(
    records: list[ClipRecord],
    log_path: str | Path,
    annotators: list[str] | None = None,
    media_dir: str | Path | None = None,
    context_window: int = DEFAULT_CONTEXT_WINDOW,
):
    """FastAPI app over one AnnotationStore; exact JSON mirrors the domain types."""
    from fastapi import FastAPI, Request
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse
    from fastapi.staticfiles import StaticFiles

    store = AnnotationStore(
        records,
        log_path=log_path,
        annotators=annotators,
        media_dir=media_dir,
        context_window=context_window,
    )
    app = FastAPI(title="signemo annotation service")
    app.state.store = store
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(AnnotationError)
    async def handle_annotation_error(request: Request, exc: AnnotationError):
        return JSONResponse(status_code=exc.status, content={"detail": exc.detail, **exc.extra})

    @app.get("/api/keymap")
    def get_keymap() -> dict:
        return {key: label.value for key, label in KEYMAP.items()}

    @app.post("/api/session/{annotator_id}")
    def register(annotator_id: str) -> dict:
        return store.register(annotator_id)

    @app.get("/api/session/{annotator_id}/next")
    def next_task(annotator_id: str) -> dict:
        return store.next_task(annotator_id)

    @app.post("/api/labels")
    def submit_label(body: LabelBody) -> dict:
        if body.key_pressed not in KEYMAP:
            raise AnnotationError(
                400,
                f"key {body.key_pressed!r} is not mapped",
                extra={"keymap": {k: v.value for k, v in KEYMAP.items()}},
            )
        label = KEYMAP[body.key_pressed]
        if body.label is not None and body.label != label.value:
            raise AnnotationError(
                400, f"label {body.label!r} contradicts key {body.key_pressed!r} ({label.value})"
            )
        event = AnnotationEvent(
            clip_id=body.clip_id,
            annotator_id=body.annotator_id,
            label=label,
            key_pressed=body.key_pressed,
            timestamp=body.timestamp,
            attempt=body.attempt,
        )
        return store.submit(event, token=body.token)

    @app.get("/api/export")
    def export(annotators: str | None = None, partial: bool = False) -> dict:
        ids = [a for a in (annotators.split(",") if annotators else []) if a] or None
        return store.export(annotator_ids=ids, partial=partial)

    if store.media_dir is not None and store.media_dir.is_dir():
        app.mount("/media", StaticFiles(directory=str(store.media_dir)), name="media")

    return app
