"""Per-frame feature extraction: face embeddings, canonical hand keypoints,
596-d early fusion, temporal segment selection, and the on-disk feature format.

Face and hand extractors are plugin interfaces. The shipped implementations
are deterministic stubs so the whole pipeline runs without external model
weights; real pretrained backbones can be dropped in behind the same
interfaces.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import ClipRecord

FACE_DIM = 512
HAND_POINTS = 42  # 21 keypoints per hand, two hands
HAND_DIM = HAND_POINTS * 2
FUSED_DIM = FACE_DIM + HAND_DIM

# MediaPipe-style keypoint indices within one 21-point hand.
WRIST = 0
MIDDLE_MCP = 9

_DEGENERATE_EPS = 1e-9


@dataclass
class FaceEmbedding:
    vector: np.ndarray  # (512,)
    valid: bool

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float32)
        if self.vector.shape != (FACE_DIM,):
            raise ValueError(f"face embedding must have shape ({FACE_DIM},), got {self.vector.shape}")
        if not self.valid:
            self.vector = np.zeros(FACE_DIM, dtype=np.float32)


@dataclass
class HandKeypoints:
    points: np.ndarray  # (42, 2) image coordinates; rows 0-20 left, 21-41 right
    valid_left: bool
    valid_right: bool

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (HAND_POINTS, 2):
            raise ValueError(f"hand keypoints must have shape ({HAND_POINTS}, 2), got {self.points.shape}")
        if not self.valid_left:
            self.points[:21] = 0.0
        if not self.valid_right:
            self.points[21:] = 0.0


@dataclass
class CanonicalHandFeature:
    vector: np.ndarray  # (84,) flattened normalized keypoints
    valid_left: bool
    valid_right: bool

    def __post_init__(self) -> None:
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if self.vector.shape != (HAND_DIM,):
            raise ValueError(f"hand feature must have shape ({HAND_DIM},), got {self.vector.shape}")


@dataclass
class FrameFeatureSequence:
    frames: np.ndarray  # (T, 596) float32
    face_valid: np.ndarray  # (T,) bool
    hand_valid: np.ndarray  # (T,) bool
    fps: float

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float32)
        self.face_valid = np.asarray(self.face_valid, dtype=bool)
        self.hand_valid = np.asarray(self.hand_valid, dtype=bool)
        if self.frames.ndim != 2 or self.frames.shape[1] != FUSED_DIM:
            raise ValueError(f"fused frames must have shape (T, {FUSED_DIM}), got {self.frames.shape}")
        t = self.frames.shape[0]
        if self.face_valid.shape != (t,) or self.hand_valid.shape != (t,):
            raise ValueError("validity masks must have one entry per frame")

    def __len__(self) -> int:
        return self.frames.shape[0]


# ---------------------------------------------------------------------------
# Hand canonicalization

def _canonicalize_one(points: np.ndarray) -> tuple[np.ndarray, bool]:
    """Map one 21x2 hand into the canonical wrist-centered frame.

    Translate the wrist to the origin, rotate the wrist-to-middle-MCP bone
    onto +y, and scale that bone to unit length. Returns zeros and False when
    the bone is degenerate.
    """
    centered = points - points[WRIST]
    bone = centered[MIDDLE_MCP]
    norm = float(np.hypot(bone[0], bone[1]))
    if norm < _DEGENERATE_EPS:
        return np.zeros_like(points), False
    ux, uy = bone[0] / norm, bone[1] / norm
    rot = np.array([[uy, -ux], [ux, uy]])  # maps (ux, uy) onto (0, 1)
    return (centered @ rot.T) / norm, True


def canonicalize_hands(raw: HandKeypoints) -> CanonicalHandFeature:
    """Normalize both hands into a translation/rotation/scale-invariant frame.

    A hand whose wrist and middle-finger MCP coincide is marked invalid and
    emitted as zeros; this is not a hard error.
    """
    out = np.zeros((HAND_POINTS, 2))
    valid_left = raw.valid_left
    valid_right = raw.valid_right
    if valid_left:
        out[:21], valid_left = _canonicalize_one(raw.points[:21])
    if valid_right:
        out[21:], valid_right = _canonicalize_one(raw.points[21:])
    return CanonicalHandFeature(vector=out.reshape(-1), valid_left=valid_left, valid_right=valid_right)


def fuse(face: FaceEmbedding, hand: CanonicalHandFeature) -> np.ndarray:
    """Early fusion: [0, 512) is the face embedding, [512, 596) the hand feature."""
    return np.concatenate([face.vector.astype(np.float32), hand.vector.astype(np.float32)])


# ---------------------------------------------------------------------------
# Temporal segment selection

class SegmentKind(enum.Enum):
    FULL = "full"
    RANDOM_2S = "random_2s"
    POST_2S = "post_2s"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SegmentStrategy:
    kind: SegmentKind
    window_s: float = 2.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValueError(f"window_s must be > 0, got {self.window_s}")
        if self.kind is SegmentKind.RANDOM_2S and self.seed is None:
            raise ValueError("random segment selection requires a seed")


def select_segment(n_frames: int, fps: float, strategy: SegmentStrategy) -> tuple[int, int]:
    """Pick the frame index range [s, e) for one clip.

    The window is floor(window_s * fps) frames; clips shorter than the window
    fall back to the full range under every strategy.
    """
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    # fps below 0.5 would floor to an empty window; keep at least one frame
    w = max(1, math.floor(strategy.window_s * fps))
    if n_frames <= w or strategy.kind is SegmentKind.FULL:
        return 0, n_frames
    if strategy.kind is SegmentKind.POST_2S:
        return n_frames - w, n_frames
    rng = np.random.default_rng(strategy.seed)
    s = int(rng.integers(0, n_frames - w + 1))
    return s, s + w


def derive_clip_seed(run_seed: int, clip_id: str) -> int:
    """Stable per-clip seed so random segments are drawn once per clip per run."""
    digest = hashlib.sha256(f"{run_seed}:{clip_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# Extractor plugin interfaces and deterministic stubs

@runtime_checkable
class FaceBackbone(Protocol):
    concurrent_safe: bool

    def embed(self, frame: np.ndarray) -> np.ndarray | None:
        """512-d embedding for one frame, or None when no face is detected."""
        ...


@runtime_checkable
class HandDetector(Protocol):
    concurrent_safe: bool

    def detect(self, frame: np.ndarray) -> HandKeypoints:
        ...


class ConstantFaceBackbone:
    """Stub backbone returning the same unit vector for every frame."""

    concurrent_safe = True

    def __init__(self, index: int = 0):
        self._vector = np.zeros(FACE_DIM, dtype=np.float32)
        self._vector[index] = 1.0

    def embed(self, frame: np.ndarray) -> np.ndarray | None:
        return self._vector.copy()


class NoFaceBackbone:
    """Stub simulating a detector that never finds a face."""

    concurrent_safe = True

    def embed(self, frame: np.ndarray) -> np.ndarray | None:
        return None


class ProjectionFaceBackbone:
    """Deterministic stand-in for a pretrained face encoder.

    Projects flattened frame pixels through a fixed seeded linear map, so
    whatever signal the frames carry survives into the embedding. An all-zero
    frame counts as face-not-detected.
    """

    concurrent_safe = True

    def __init__(self, frame_size: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self._projection = rng.standard_normal((FACE_DIM, frame_size)).astype(np.float32)
        self._projection /= math.sqrt(frame_size)

    def embed(self, frame: np.ndarray) -> np.ndarray | None:
        flat = np.asarray(frame, dtype=np.float32).reshape(-1)
        if not np.any(flat):
            return None
        if flat.size != self._projection.shape[1]:
            raise ValueError(
                f"frame has {flat.size} values but backbone was built for {self._projection.shape[1]}"
            )
        return self._projection @ flat


# A loose 21-point hand template (wrist at origin, fingers upward).
_HAND_TEMPLATE = np.array(
    [[0.0, 0.0]]
    + [[-1.5 + 0.5 * f, 1.0 + 0.8 * j] for f in range(5) for j in range(1, 5)]
)


class TemplateHandDetector:
    """Stub detector emitting a rigid template hand moved by frame statistics."""

    concurrent_safe = True

    def detect(self, frame: np.ndarray) -> HandKeypoints:
        flat = np.asarray(frame, dtype=np.float64).reshape(-1)
        if not np.any(flat):
            return HandKeypoints(points=np.zeros((HAND_POINTS, 2)), valid_left=False, valid_right=False)
        shift = np.array([100.0 + 10.0 * float(flat.mean()), 80.0 + 5.0 * float(flat.std())])
        left = _HAND_TEMPLATE + shift
        right = _HAND_TEMPLATE * np.array([-1.0, 1.0]) + shift + np.array([40.0, 0.0])
        return HandKeypoints(points=np.vstack([left, right]), valid_left=True, valid_right=True)


def extract_face(frames: Sequence[np.ndarray], backbone: FaceBackbone) -> list[FaceEmbedding]:
    """One embedding per frame, in order; detection failures become invalid zeros."""
    if len(frames) == 0:
        raise ValueError("extract_face requires at least one frame")
    out = []
    for frame in frames:
        vec = backbone.embed(frame)
        if vec is None:
            out.append(FaceEmbedding(vector=np.zeros(FACE_DIM, dtype=np.float32), valid=False))
        else:
            out.append(FaceEmbedding(vector=vec, valid=True))
    return out


def extract_hands(frames: Sequence[np.ndarray], detector: HandDetector) -> list[HandKeypoints]:
    if len(frames) == 0:
        raise ValueError("extract_hands requires at least one frame")
    return [detector.detect(frame) for frame in frames]


def fuse_clip(
    frames: Sequence[np.ndarray],
    fps: float,
    face_backbone: FaceBackbone,
    hand_detector: HandDetector,
) -> FrameFeatureSequence:
    """Extract, canonicalize, and fuse every frame of one clip."""
    faces = extract_face(frames, face_backbone)
    hands = [canonicalize_hands(kp) for kp in extract_hands(frames, hand_detector)]
    fused = np.stack([fuse(f, h) for f, h in zip(faces, hands)])
    return FrameFeatureSequence(
        frames=fused,
        face_valid=np.array([f.valid for f in faces]),
        hand_valid=np.array([h.valid_left or h.valid_right for h in hands]),
        fps=fps,
    )


# ---------------------------------------------------------------------------
# Frame providers

@runtime_checkable
class FrameProvider(Protocol):
    def frames_for(self, record: ClipRecord) -> list[np.ndarray]:
        ...


class SyntheticFrameProvider:
    """Deterministic synthetic frames for manifests without real media.

    Frames are seeded noise keyed by (seed, clip_id). When the record already
    carries a label, a class-dependent bias is mixed in so downstream models
    have signal to learn from; strength 0 disables that.
    """

    frame_shape = (8, 8, 3)

    def __init__(self, seed: int = 0, signal_strength: float = 1.0):
        self.seed = seed
        self.signal_strength = signal_strength

    def frames_for(self, record: ClipRecord) -> list[np.ndarray]:
        from .labels import LABEL_INDEX  # local import to avoid cycle at module load

        n_frames = max(1, round(record.duration_s * record.fps))
        rng = np.random.default_rng(derive_clip_seed(self.seed, record.clip_id))
        frames = rng.normal(0.0, 1.0, size=(n_frames, *self.frame_shape))
        if self.signal_strength > 0 and record.labels:
            class_idx = LABEL_INDEX[record.labels[0][0]]
            pattern_rng = np.random.default_rng(1000 + class_idx)
            pattern = pattern_rng.normal(0.0, 1.0, size=self.frame_shape)
            frames = frames + self.signal_strength * pattern
        return [f.astype(np.float32) for f in frames]


class VideoFrameProvider:
    """Decodes clip frames from video files (needs the optional video extra)."""

    def __init__(self, media_root: str | Path | None = None):
        import cv2  # deferred optional dependency

        self._cv2 = cv2
        self.media_root = Path(media_root) if media_root is not None else None

    def frames_for(self, record: ClipRecord) -> list[np.ndarray]:
        path = Path(record.video_path)
        if self.media_root is not None and not path.is_absolute():
            path = self.media_root / path
        cap = self._cv2.VideoCapture(str(path))
        if not cap.isOpened():
            raise FileNotFoundError(f"cannot open video {path}")
        try:
            fps = cap.get(self._cv2.CAP_PROP_FPS) or record.fps
            start = int(round(record.start_s * fps))
            end = int(round(record.end_s * fps))
            cap.set(self._cv2.CAP_PROP_POS_FRAMES, start)
            frames: list[np.ndarray] = []
            for _ in range(start, max(end, start + 1)):
                ok, frame = cap.read()
                if not ok:
                    break
                frames.append(frame)
        finally:
            cap.release()
        if not frames:
            raise ValueError(f"no frames decoded from {path} in [{record.start_s}, {record.end_s})s")
        return frames


def default_stub_extractors(seed: int = 0) -> tuple[FaceBackbone, HandDetector]:
    frame_size = int(np.prod(SyntheticFrameProvider.frame_shape))
    return ProjectionFaceBackbone(frame_size=frame_size, seed=seed), TemplateHandDetector()


# ---------------------------------------------------------------------------
# On-disk feature format: one JSON header line, then little-endian blobs for
# the (T, 596) float32 array and the two uint8 validity masks.

FEATURE_SUFFIX = ".feat"
_FORMAT_NAME = "signemo-features"


def feature_path(features_dir: str | Path, clip_id: str) -> Path:
    if "/" in clip_id or "\\" in clip_id:
        raise ValueError(f"clip_id {clip_id!r} is not filesystem-safe")
    return Path(features_dir) / f"{clip_id}{FEATURE_SUFFIX}"


def save_features(seq: FrameFeatureSequence, clip_id: str, features_dir: str | Path) -> Path:
    t, dim = seq.frames.shape
    frames_bytes = seq.frames.astype("<f4").tobytes()
    face_bytes = seq.face_valid.astype(np.uint8).tobytes()
    hand_bytes = seq.hand_valid.astype(np.uint8).tobytes()
    header = {
        "format": _FORMAT_NAME,
        "version": 1,
        "clip_id": clip_id,
        "t": t,
        "dim": dim,
        "fps": seq.fps,
        "dtype": "float32",
        "frames_offset": 0,
        "face_valid_offset": len(frames_bytes),
        "hand_valid_offset": len(frames_bytes) + len(face_bytes),
    }
    path = feature_path(features_dir, clip_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(frames_bytes)
        fh.write(face_bytes)
        fh.write(hand_bytes)
    return path


def load_features(path: str | Path) -> tuple[str, FrameFeatureSequence]:
    path = Path(path)
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a feature file ({exc})") from None
        if header.get("format") != _FORMAT_NAME:
            raise ValueError(f"{path}: not a feature file (format={header.get('format')!r})")
        blob = fh.read()
    t, dim = header["t"], header["dim"]
    fo, vo, ho = header["frames_offset"], header["face_valid_offset"], header["hand_valid_offset"]
    frames = np.frombuffer(blob, dtype="<f4", count=t * dim, offset=fo).reshape(t, dim)
    face_valid = np.frombuffer(blob, dtype=np.uint8, count=t, offset=vo).astype(bool)
    hand_valid = np.frombuffer(blob, dtype=np.uint8, count=t, offset=ho).astype(bool)
    seq = FrameFeatureSequence(
        frames=frames.copy(), face_valid=face_valid, hand_valid=hand_valid, fps=header["fps"]
    )
    return header["clip_id"], seq


# ---------------------------------------------------------------------------
# Manifest-level extraction

@dataclass
class ExtractionRun:
    extracted: int = 0
    failed: list[str] = field(default_factory=list)
    segments: dict[str, tuple[int, int]] = field(default_factory=dict)


def extract_manifest_features(
    records: Iterable[ClipRecord],
    features_dir: str | Path,
    frame_provider: FrameProvider,
    face_backbone: FaceBackbone,
    hand_detector: HandDetector,
    strategy: SegmentStrategy,
    jobs: int = 1,
) -> ExtractionRun:
    """Write one feature file per clip, applying segment selection first.

    Random segments draw a per-clip seed from the strategy's run seed, so
    re-running with the same seed reproduces the same windows.
    """
    records = list(records)
    run = ExtractionRun()

    def process(rec: ClipRecord) -> tuple[str, tuple[int, int] | None, str | None]:
        try:
            frames = frame_provider.frames_for(rec)
            clip_strategy = strategy
            if strategy.kind is SegmentKind.RANDOM_2S:
                clip_strategy = SegmentStrategy(
                    kind=strategy.kind,
                    window_s=strategy.window_s,
                    seed=derive_clip_seed(strategy.seed or 0, rec.clip_id),
                )
            s, e = select_segment(len(frames), rec.fps, clip_strategy)
            seq = fuse_clip(frames[s:e], rec.fps, face_backbone, hand_detector)
            save_features(seq, rec.clip_id, features_dir)
            return rec.clip_id, (s, e), None
        except Exception as exc:  # per-clip failures must not kill the run
            return rec.clip_id, None, str(exc)

    parallel_ok = (
        jobs > 1
        and getattr(face_backbone, "concurrent_safe", False)
        and getattr(hand_detector, "concurrent_safe", False)
    )
    if parallel_ok:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process, records))
    else:
        results = [process(rec) for rec in records]

    for clip_id, segment, error in results:
        if error is None:
            run.extracted += 1
            run.segments[clip_id] = segment
        else:
            run.failed.append(f"{clip_id}: {error}")
    return run
