"""Vision-LLM comparison client.

Samples frames from each clip, sends them with a single-label prompt to a
vision-capable LLM at temperature 0, and parses the answer into a one-hot
prediction. All network traffic goes through a transport interface; the
shipped mock and recorded-fixture transports let the full path run and be
tested without credentials.
"""

from __future__ import annotations

import base64
import importlib.resources
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import ClipRecord
from .features import FrameProvider
from .labels import LABEL_INDEX, LABEL_ORDER, N_CLASSES, EmotionLabel
from .model import Prediction

log = logging.getLogger(__name__)


@dataclass
class LlmEndpointConfig:
    provider_id: str
    model_name: str
    api_key_env_var: str = ""
    temperature: float = 0.0
    max_frames: int = 8
    timeout_s: float = 30.0
    retries: int = 2

    def __post_init__(self) -> None:
        if self.max_frames < 1:
            raise ValueError(f"max_frames must be >= 1, got {self.max_frames}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")
        if not self.api_key_env_var:
            self.api_key_env_var = f"{self.provider_id.upper().replace('-', '_')}_API_KEY"


@dataclass
class LlmRequest:
    clip_id: str
    prompt: str
    frames: list[np.ndarray]
    model_name: str
    temperature: float


class TransportError(RuntimeError):
    """Request-level failure (network, HTTP status, provider error)."""


@runtime_checkable
class LlmTransport(Protocol):
    def complete(self, request: LlmRequest) -> str:
        """Raw text answer for one request; raises TransportError on failure."""
        ...


class MockTransport:
    """Scripted transport for tests.

    responses maps clip_id to either a string (returned every time) or a list
    of strings consumed one per call; default applies to unknown clips. The
    string "<error>" raises a TransportError instead.
    """

    def __init__(self, responses: dict[str, str | list[str]] | None = None, default: str = "neutral"):
        self._responses = dict(responses or {})
        self._default = default
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def complete(self, request: LlmRequest) -> str:
        with self._lock:
            self.calls.append(request.clip_id)
            entry = self._responses.get(request.clip_id, self._default)
            if isinstance(entry, list):
                answer = entry.pop(0) if entry else self._default
            else:
                answer = entry
        if answer == "<error>":
            raise TransportError(f"scripted failure for {request.clip_id}")
        return answer


class RecordedFixtureTransport:
    """Replays answers recorded in a JSON fixture file.

    Format: {"responses": {clip_id: "text" | ["first", "second", ...]}}.
    Lists are consumed per call, so retry paths replay faithfully. Clips
    absent from the fixture raise a TransportError.
    """

    def __init__(self, path: str | Path):
        with Path(path).open("r", encoding="utf-8") as fh:
            data = json.load(fh)
        if "responses" not in data:
            raise ValueError(f"{path}: fixture file needs a top-level 'responses' object")
        self._responses = {
            k: list(v) if isinstance(v, list) else v for k, v in data["responses"].items()
        }
        self._lock = threading.Lock()

    def complete(self, request: LlmRequest) -> str:
        with self._lock:
            if request.clip_id not in self._responses:
                raise TransportError(f"no recorded response for {request.clip_id}")
            entry = self._responses[request.clip_id]
            if isinstance(entry, list):
                if not entry:
                    raise TransportError(f"recorded responses for {request.clip_id} exhausted")
                return entry.pop(0)
            return entry


class HttpTransport:
    """Minimal JSON-over-HTTP bridge.

    Posts {model, temperature, prompt, frames: [base64 raw arrays]} and expects
    {"text": "..."} back. Provider-specific wire formats belong in thin
    adapters with this same interface.
    """

    def __init__(self, endpoint_url: str, cfg: LlmEndpointConfig, client=None):
        import httpx  # deferred so offline use never touches it

        self._url = endpoint_url
        self._cfg = cfg
        api_key = os.environ.get(cfg.api_key_env_var, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=cfg.timeout_s, headers=headers)

    def complete(self, request: LlmRequest) -> str:
        payload = {
            "model": request.model_name,
            "temperature": request.temperature,
            "prompt": request.prompt,
            "frames": [
                {
                    "shape": list(f.shape),
                    "dtype": str(f.dtype),
                    "data": base64.b64encode(np.ascontiguousarray(f).tobytes()).decode("ascii"),
                }
                for f in request.frames
            ],
        }
        try:
            response = self._client.post(self._url, json=payload)
            response.raise_for_status()
            return response.json()["text"]
        except Exception as exc:
            raise TransportError(str(exc)) from exc


# ---------------------------------------------------------------------------

def sample_frame_indices(n_frames: int, max_frames: int) -> list[int]:
    """Uniformly spread frame picks: floor((i + 0.5) * n / m), strictly increasing."""
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if max_frames < 1:
        raise ValueError(f"max_frames must be >= 1, got {max_frames}")
    if n_frames <= max_frames:
        return list(range(n_frames))
    return [int((i + 0.5) * n_frames // max_frames) for i in range(max_frames)]


def load_prompt_template() -> str:
    return (
        importlib.resources.files("signemo").joinpath("assets/llm_prompt.txt").read_text("utf-8")
    )


def build_prompt(record: ClipRecord, template: str | None = None) -> str:
    template = template if template is not None else load_prompt_template()
    return template.format(subtitle=record.subtitle_text or "")


def parse_label_response(text: str) -> EmotionLabel | None:
    """Strict single-word parse: the trimmed answer must be one of the 7 labels.

    Case-insensitive; trailing punctuation is tolerated, extra words are not
    ("I think joy." does not parse).
    """
    cleaned = text.strip().lower().rstrip(".!?,;:")
    try:
        return EmotionLabel(cleaned)
    except ValueError:
        return None


@dataclass
class ClipOutcome:
    clip_id: str
    prediction: Prediction | None = None
    unparsable: bool = False
    failed_reason: str | None = None


def classify_clip_llm(
    record: ClipRecord,
    frames: Sequence[np.ndarray],
    cfg: LlmEndpointConfig,
    transport: LlmTransport,
    prompt_template: str | None = None,
) -> ClipOutcome:
    """One clip through the LLM: sample frames, ask, parse, one-hot.

    Transport errors are retried up to cfg.retries and then mark the clip
    failed; a parse failure gets exactly one retry request and then marks the
    clip unparsable. Neither outcome aborts the run.
    """
    if len(frames) == 0:
        return ClipOutcome(clip_id=record.clip_id, failed_reason="no frames")
    picks = sample_frame_indices(len(frames), cfg.max_frames)
    request = LlmRequest(
        clip_id=record.clip_id,
        prompt=build_prompt(record, prompt_template),
        frames=[np.asarray(frames[i]) for i in picks],
        model_name=cfg.model_name,
        temperature=cfg.temperature,
    )

    def ask() -> str | None:
        attempts = cfg.retries + 1
        for attempt in range(attempts):
            try:
                return transport.complete(request)
            except TransportError as exc:
                last = exc
                log.warning("clip %s: transport attempt %d failed: %s", record.clip_id, attempt + 1, exc)
        raise last

    try:
        answer = ask()
    except TransportError as exc:
        return ClipOutcome(clip_id=record.clip_id, failed_reason=str(exc))
    label = parse_label_response(answer)
    if label is None:
        log.info("clip %s: unparsable answer %r, retrying once", record.clip_id, answer)
        try:
            answer = ask()
        except TransportError as exc:
            return ClipOutcome(clip_id=record.clip_id, failed_reason=str(exc))
        label = parse_label_response(answer)
        if label is None:
            return ClipOutcome(clip_id=record.clip_id, unparsable=True)
    dist = np.zeros(N_CLASSES)
    dist[LABEL_INDEX[label]] = 1.0
    pred = Prediction(clip_id=record.clip_id, distribution=dist, label=label)
    return ClipOutcome(clip_id=record.clip_id, prediction=pred)


class _RateLimiter:
    """Serializes dispatch so requests start at most rate_per_s per second."""

    def __init__(self, rate_per_s: float | None):
        self._interval = 0.0 if not rate_per_s else 1.0 / rate_per_s
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = max(0.0, self._next_at - now)
            self._next_at = max(now, self._next_at) + self._interval
        if delay > 0:
            time.sleep(delay)


@dataclass
class LlmRun:
    predictions: list[Prediction] = field(default_factory=list)
    unparsable: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_predicted": len(self.predictions),
            "unparsable": self.unparsable,
            "failed": self.failed,
        }


def llm_predict_manifest(
    records: Sequence[ClipRecord],
    frame_provider: FrameProvider,
    cfg: LlmEndpointConfig,
    transport: LlmTransport,
    jobs: int = 1,
    rate_per_s: float | None = None,
) -> LlmRun:
    """Classify every clip; each lands in exactly one of predictions/unparsable/failed.

    Output order follows the manifest regardless of completion order.
    """
    records = list(records)
    template = load_prompt_template()
    limiter = _RateLimiter(rate_per_s)

    def process(rec: ClipRecord) -> ClipOutcome:
        limiter.wait()
        try:
            frames = frame_provider.frames_for(rec)
        except Exception as exc:
            return ClipOutcome(clip_id=rec.clip_id, failed_reason=f"frame decode: {exc}")
        return classify_clip_llm(rec, frames, cfg, transport, prompt_template=template)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(process, records))
    else:
        outcomes = [process(rec) for rec in records]

    run = LlmRun()
    for outcome in outcomes:
        if outcome.prediction is not None:
            run.predictions.append(outcome.prediction)
        elif outcome.unparsable:
            run.unparsable.append(outcome.clip_id)
        else:
            run.failed[outcome.clip_id] = outcome.failed_reason or "unknown"
    return run
