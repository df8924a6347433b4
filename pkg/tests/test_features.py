"""Hand canonicalization, fusion layout, segment selection, and feature files."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from signemo.corpus import ClipRecord
from signemo.features import (
    FACE_DIM,
    FUSED_DIM,
    HAND_DIM,
    HAND_POINTS,
    MIDDLE_MCP,
    WRIST,
    ConstantFaceBackbone,
    FaceEmbedding,
    HandKeypoints,
    NoFaceBackbone,
    ProjectionFaceBackbone,
    SegmentKind,
    SegmentStrategy,
    SyntheticFrameProvider,
    TemplateHandDetector,
    canonicalize_hands,
    default_stub_extractors,
    derive_clip_seed,
    extract_face,
    extract_manifest_features,
    feature_path,
    fuse,
    fuse_clip,
    load_features,
    save_features,
    select_segment,
)
from signemo.features import FrameFeatureSequence


def make_record(clip_id="c1", duration=2.0, fps=25.0):
    return ClipRecord(
        clip_id=clip_id,
        video_path=f"media/{clip_id}.mp4",
        signer_id="s01",
        subtitle_text="hello",
        start_s=0.0,
        end_s=duration,
        fps=fps,
        labels=[],
    )


def random_hand_points(rng):
    """One plausible two-hand keypoint array with non-degenerate bones."""
    pts = rng.normal(0.0, 1.0, size=(HAND_POINTS, 2))
    pts[MIDDLE_MCP] = pts[WRIST] + rng.uniform(0.5, 2.0) * _unit(rng)
    pts[21 + MIDDLE_MCP] = pts[21 + WRIST] + rng.uniform(0.5, 2.0) * _unit(rng)
    return pts


def _unit(rng):
    theta = rng.uniform(0, 2 * np.pi)
    return np.array([np.cos(theta), np.sin(theta)])


def similarity_transform(points, theta, scale, translation):
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    return scale * (points @ rot.T) + translation


# ---------------------------------------------------------------------------
# Constants

def test_dimension_constants():
    assert FACE_DIM == 512
    assert HAND_DIM == 84
    assert FUSED_DIM == 596
    assert HAND_POINTS * 2 == HAND_DIM


# ---------------------------------------------------------------------------
# Hand canonicalization

def test_canonical_frame_pins_wrist_and_reference_bone():
    rng = np.random.default_rng(0)
    raw = HandKeypoints(points=random_hand_points(rng), valid_left=True, valid_right=True)
    canon = canonicalize_hands(raw).vector.reshape(HAND_POINTS, 2)
    for offset in (0, 21):
        assert canon[offset + WRIST] == pytest.approx([0.0, 0.0], abs=1e-12)
        assert canon[offset + MIDDLE_MCP] == pytest.approx([0.0, 1.0], abs=1e-9)


def test_canonicalization_invariant_under_similarity_transforms():
    rng = np.random.default_rng(42)
    for trial in range(200):
        pts = random_hand_points(rng)
        base = canonicalize_hands(
            HandKeypoints(points=pts, valid_left=True, valid_right=True)
        ).vector
        theta = rng.uniform(0, 2 * np.pi)
        scale = rng.uniform(0.05, 20.0)
        translation = rng.uniform(-100, 100, size=2)
        moved = similarity_transform(pts, theta, scale, translation)
        out = canonicalize_hands(
            HandKeypoints(points=moved, valid_left=True, valid_right=True)
        ).vector
        assert np.max(np.abs(out - base)) < 1e-6, trial


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=0, max_value=2 * math.pi),
    st.floats(min_value=0.1, max_value=10.0),
    st.floats(min_value=-50, max_value=50),
    st.floats(min_value=-50, max_value=50),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_canonicalization_invariance_property(theta, scale, tx, ty, seed):
    pts = random_hand_points(np.random.default_rng(seed))
    base = canonicalize_hands(HandKeypoints(points=pts, valid_left=True, valid_right=True)).vector
    moved = similarity_transform(pts, theta, scale, np.array([tx, ty]))
    out = canonicalize_hands(HandKeypoints(points=moved, valid_left=True, valid_right=True)).vector
    assert np.max(np.abs(out - base)) < 1e-6


def test_degenerate_bone_is_marked_invalid_not_fatal():
    pts = np.zeros((HAND_POINTS, 2))
    pts[21:] = random_hand_points(np.random.default_rng(1))[21:]
    raw = HandKeypoints(points=pts, valid_left=True, valid_right=True)
    canon = canonicalize_hands(raw)
    assert not canon.valid_left
    assert canon.valid_right
    assert np.all(canon.vector[:42] == 0.0)
    assert np.any(canon.vector[42:] != 0.0)


def test_undetected_hands_stay_zero():
    pts = np.ones((HAND_POINTS, 2))
    raw = HandKeypoints(points=pts, valid_left=False, valid_right=False)
    canon = canonicalize_hands(raw)
    assert not canon.valid_left and not canon.valid_right
    assert np.all(canon.vector == 0.0)


def test_hands_canonicalized_independently():
    rng = np.random.default_rng(3)
    pts = random_hand_points(rng)
    base = canonicalize_hands(HandKeypoints(points=pts, valid_left=True, valid_right=True)).vector
    moved = pts.copy()
    moved[21:] = similarity_transform(pts[21:], 1.0, 3.0, np.array([5.0, -2.0]))
    out = canonicalize_hands(HandKeypoints(points=moved, valid_left=True, valid_right=True)).vector
    assert np.max(np.abs(out - base)) < 1e-9


# ---------------------------------------------------------------------------
# Fusion

def test_fusion_layout_is_lossless():
    rng = np.random.default_rng(7)
    face_vec = rng.normal(size=FACE_DIM).astype(np.float32)
    hand_vec = rng.normal(size=HAND_DIM)
    fused = fuse(
        FaceEmbedding(vector=face_vec, valid=True),
        canonicalize_hands(
            HandKeypoints(points=random_hand_points(rng), valid_left=True, valid_right=True)
        ),
    )
    assert fused.shape == (FUSED_DIM,)
    assert np.array_equal(fused[:FACE_DIM], face_vec)
    fused2 = fuse(
        FaceEmbedding(vector=face_vec, valid=True),
        type("H", (), {"vector": hand_vec})(),
    )
    assert np.array_equal(fused2[FACE_DIM:], hand_vec.astype(np.float32))


def test_face_embedding_shape_enforced():
    with pytest.raises(ValueError, match="512"):
        FaceEmbedding(vector=np.zeros(100), valid=True)
    with pytest.raises(ValueError, match="42"):
        HandKeypoints(points=np.zeros((10, 2)), valid_left=True, valid_right=True)


# ---------------------------------------------------------------------------
# Segment selection

def brute_segment(n, fps, kind, window_s=2.0, seed=None):
    w = max(1, math.floor(window_s * fps))
    if n <= w or kind is SegmentKind.FULL:
        return 0, n
    if kind is SegmentKind.POST_2S:
        return n - w, n
    start = int(np.random.default_rng(seed).integers(0, n - w + 1))
    return start, start + w


def test_segment_selection_exhaustive_over_lengths_and_rates():
    for fps in (24.0, 25.0, 30.0):
        w = math.floor(2.0 * fps)
        for n in range(1, 401):
            full = select_segment(n, fps, SegmentStrategy(kind=SegmentKind.FULL))
            assert full == (0, n)
            post = select_segment(n, fps, SegmentStrategy(kind=SegmentKind.POST_2S))
            assert post == brute_segment(n, fps, SegmentKind.POST_2S)
            rand = select_segment(n, fps, SegmentStrategy(kind=SegmentKind.RANDOM_2S, seed=n))
            assert rand == brute_segment(n, fps, SegmentKind.RANDOM_2S, seed=n)
            for s, e in (full, post, rand):
                assert 0 <= s < e <= n
            if n > w:
                assert post[1] - post[0] == w
                assert rand[1] - rand[0] == w
            else:
                assert post == (0, n) and rand == (0, n)


def test_random_segment_deterministic_per_seed():
    a = select_segment(300, 25.0, SegmentStrategy(kind=SegmentKind.RANDOM_2S, seed=5))
    b = select_segment(300, 25.0, SegmentStrategy(kind=SegmentKind.RANDOM_2S, seed=5))
    assert a == b
    starts = {
        select_segment(300, 25.0, SegmentStrategy(kind=SegmentKind.RANDOM_2S, seed=s))[0]
        for s in range(30)
    }
    assert len(starts) > 1


def test_low_fps_window_clamps_to_one_frame():
    s, e = select_segment(10, 0.2, SegmentStrategy(kind=SegmentKind.POST_2S))
    assert (s, e) == (9, 10)


def test_segment_argument_validation():
    with pytest.raises(ValueError):
        select_segment(0, 25.0, SegmentStrategy(kind=SegmentKind.FULL))
    with pytest.raises(ValueError):
        select_segment(10, 0.0, SegmentStrategy(kind=SegmentKind.FULL))
    with pytest.raises(ValueError):
        SegmentStrategy(kind=SegmentKind.FULL, window_s=0.0)
    with pytest.raises(ValueError, match="seed"):
        SegmentStrategy(kind=SegmentKind.RANDOM_2S)


def test_clip_seed_is_stable_and_keyed():
    assert derive_clip_seed(1, "c1") == derive_clip_seed(1, "c1")
    assert derive_clip_seed(1, "c1") != derive_clip_seed(2, "c1")
    assert derive_clip_seed(1, "c1") != derive_clip_seed(1, "c2")


# ---------------------------------------------------------------------------
# Frame-level extraction stubs

def test_extract_face_marks_failures_invalid():
    frames = [np.ones((8, 8, 3), dtype=np.float32)] * 3
    embeds = extract_face(frames, NoFaceBackbone())
    assert all(not e.valid for e in embeds)
    assert all(np.all(e.vector == 0.0) for e in embeds)
    with pytest.raises(ValueError):
        extract_face([], ConstantFaceBackbone())


def test_projection_backbone_treats_blank_frame_as_no_face():
    backbone = ProjectionFaceBackbone(frame_size=8 * 8 * 3, seed=0)
    assert backbone.embed(np.zeros((8, 8, 3))) is None
    vec = backbone.embed(np.ones((8, 8, 3)))
    assert vec is not None and vec.shape == (FACE_DIM,)


def test_fuse_clip_produces_masked_sequence():
    provider = SyntheticFrameProvider(seed=0)
    rec = make_record(duration=1.0)
    frames = provider.frames_for(rec)
    face, hands = default_stub_extractors(seed=0)
    seq = fuse_clip(frames, rec.fps, face, hands)
    assert seq.frames.shape == (len(frames), FUSED_DIM)
    assert seq.frames.dtype == np.float32
    assert seq.face_valid.shape == (len(frames),)
    assert seq.fps == rec.fps


def test_synthetic_frames_deterministic_and_label_sensitive():
    rec = make_record()
    a = SyntheticFrameProvider(seed=0).frames_for(rec)
    b = SyntheticFrameProvider(seed=0).frames_for(rec)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = SyntheticFrameProvider(seed=1).frames_for(rec)
    assert not np.array_equal(a[0], c[0])
    assert len(a) == round(rec.duration_s * rec.fps)


# ---------------------------------------------------------------------------
# Feature files

def _random_sequence(rng, t=11):
    return FrameFeatureSequence(
        frames=rng.normal(size=(t, FUSED_DIM)).astype(np.float32),
        face_valid=rng.integers(0, 2, size=t).astype(bool),
        hand_valid=rng.integers(0, 2, size=t).astype(bool),
        fps=25.0,
    )


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    seq = _random_sequence(rng)
    path = save_features(seq, "clip_a", tmp_path)
    assert path == feature_path(tmp_path, "clip_a")
    clip_id, loaded = load_features(path)
    assert clip_id == "clip_a"
    assert np.array_equal(loaded.frames, seq.frames)
    assert np.array_equal(loaded.face_valid, seq.face_valid)
    assert np.array_equal(loaded.hand_valid, seq.hand_valid)
    assert loaded.fps == seq.fps


def test_feature_writes_are_byte_identical(tmp_path):
    rng = np.random.default_rng(1)
    seq = _random_sequence(rng)
    p1 = save_features(seq, "x", tmp_path / "a")
    p2 = save_features(seq, "x", tmp_path / "b")
    assert p1.read_bytes() == p2.read_bytes()


def test_feature_path_rejects_traversal(tmp_path):
    with pytest.raises(ValueError):
        feature_path(tmp_path, "../evil")


def test_load_features_rejects_foreign_files(tmp_path):
    path = tmp_path / "junk.feat"
    path.write_bytes(b"\x00\x01binary nonsense\n more")
    with pytest.raises(ValueError, match="not a feature file"):
        load_features(path)
    path2 = tmp_path / "other.feat"
    path2.write_text('{"format": "something-else"}\n')
    with pytest.raises(ValueError, match="not a feature file"):
        load_features(path2)


# ---------------------------------------------------------------------------
# Manifest-level extraction

def _extract(records, out_dir, jobs=1, strategy=None, provider=None):
    face, hands = default_stub_extractors(seed=0)
    return extract_manifest_features(
        records,
        out_dir,
        provider or SyntheticFrameProvider(seed=0),
        face,
        hands,
        strategy or SegmentStrategy(kind=SegmentKind.FULL),
        jobs=jobs,
    )


def test_extraction_writes_one_file_per_clip(tmp_path):
    records = [make_record(f"c{i}") for i in range(4)]
    run = _extract(records, tmp_path)
    assert run.extracted == 4
    assert run.failed == []
    for rec in records:
        assert feature_path(tmp_path, rec.clip_id).exists()
    assert set(run.segments) == {r.clip_id for r in records}


def test_extraction_parallel_matches_serial(tmp_path):
    records = [make_record(f"c{i}") for i in range(6)]
    _extract(records, tmp_path / "serial", jobs=1)
    _extract(records, tmp_path / "parallel", jobs=4)
    for rec in records:
        a = feature_path(tmp_path / "serial", rec.clip_id).read_bytes()
        b = feature_path(tmp_path / "parallel", rec.clip_id).read_bytes()
        assert a == b


def test_extraction_random_segments_reproducible(tmp_path):
    records = [make_record(f"c{i}", duration=8.0) for i in range(5)]
    strategy = SegmentStrategy(kind=SegmentKind.RANDOM_2S, seed=3)
    run1 = _extract(records, tmp_path / "one", strategy=strategy)
    run2 = _extract(records, tmp_path / "two", strategy=strategy)
    assert run1.segments == run2.segments
    w = math.floor(2.0 * 25.0)
    assert all(e - s == w for s, e in run1.segments.values())
    assert len({seg for seg in run1.segments.values()}) > 1


def test_extraction_survives_per_clip_failures(tmp_path):
    class FlakyProvider:
        def frames_for(self, record):
            if record.clip_id == "c1":
                raise RuntimeError("decoder exploded")
            return SyntheticFrameProvider(seed=0).frames_for(record)

    records = [make_record(f"c{i}") for i in range(3)]
    run = _extract(records, tmp_path, provider=FlakyProvider())
    assert run.extracted == 2
    assert len(run.failed) == 1
    assert "c1" in run.failed[0] and "decoder exploded" in run.failed[0]
    assert not feature_path(tmp_path, "c1").exists()
