"""Per-frame features: hand canonicalization, face embeddings, fusion.

Hand keypoints arrive as image coordinates that depend on camera framing;
canonicalization removes translation, scale, and rotation so the same
handshape always produces the same 84-dim vector. A face embedding (512)
and the canonical hands (84) concatenate into the fused 596-dim frame
feature. Whole clips are reduced to a frame window chosen by a segment
strategy, then written to disk for training.
"""

import tempfile
from pathlib import Path

import numpy as np

from signemo.corpus import ClipRecord
from signemo.features import (
    FACE_DIM,
    FUSED_DIM,
    HAND_DIM,
    HandKeypoints,
    SegmentKind,
    SegmentStrategy,
    SyntheticFrameProvider,
    canonicalize_hands,
    default_stub_extractors,
    extract_manifest_features,
    feature_path,
    fuse,
    load_features,
    select_segment,
)

work = Path(tempfile.mkdtemp(prefix="signemo-demo-"))
rng = np.random.default_rng(3)

# --- canonicalization is invariant to similarity transforms -------------
points = rng.normal(size=(42, 2))
raw = HandKeypoints(points=points.copy(), valid_left=True, valid_right=True)

angle = rng.uniform(0, 2 * np.pi)
rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
moved = HandKeypoints(points=(points @ rot.T) * 3.7 + [120.0, -45.0],
                      valid_left=True, valid_right=True)

a = canonicalize_hands(raw)
b = canonicalize_hands(moved)
drift = float(np.max(np.abs(a.vector - b.vector)))
print(f"canonical vectors agree after rotate/scale/shift: max diff {drift:.2e}")

# --- fusion keeps both inputs recoverable by slicing --------------------
face_vec = rng.normal(size=FACE_DIM).astype(np.float32)
from signemo.features import FaceEmbedding

fused = fuse(FaceEmbedding(vector=face_vec, valid=True), a)
assert fused.shape == (FUSED_DIM,)
assert np.array_equal(fused[:FACE_DIM], face_vec)
assert np.array_equal(fused[FACE_DIM:], a.vector.astype(np.float32))
print(f"fused frame feature: {FACE_DIM} face + {HAND_DIM} hand = {fused.shape[0]} dims")

# --- segment strategies pick which frames represent the clip ------------
n_frames, fps = 150, 25.0
for kind in SegmentKind:
    strategy = SegmentStrategy(kind=kind, seed=0 if kind is SegmentKind.RANDOM_2S else None)
    start, stop = select_segment(n_frames, fps, strategy)
    print(f"  {kind.value:<8} -> frames [{start}, {stop}) of {n_frames} at {fps} fps")

# --- end-to-end extraction over a manifest ------------------------------
records = [
    ClipRecord(clip_id=f"clip{i:02d}", video_path=f"media/clip{i:02d}.mp4",
               signer_id="s01", subtitle_text="", start_s=0.0, end_s=2.0, fps=25.0)
    for i in range(4)
]
face_backbone, hand_detector = default_stub_extractors(seed=0)
run = extract_manifest_features(
    records,
    features_dir=work / "feats",
    frame_provider=SyntheticFrameProvider(seed=0),
    face_backbone=face_backbone,
    hand_detector=hand_detector,
    strategy=SegmentStrategy(kind=SegmentKind.POST_2S),
)
print(f"\nextracted {run.extracted} clips, {len(run.failed)} failures")
clip_id, seq = load_features(feature_path(work / "feats", "clip00"))
print(f"{clip_id}: fused frames {seq.frames.shape}, "
      f"face valid {int(seq.face_valid.sum())}/{len(seq)}, "
      f"segment {run.segments['clip00']}")
