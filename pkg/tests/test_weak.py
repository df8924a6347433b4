"""Subtitle-driven weak labeling: stubs, thresholds, and pipeline behavior."""

import numpy as np
import pytest

from signemo.corpus import ClipRecord, LabelProvenance, LabelSource
from signemo.labels import LABEL_ORDER, N_CLASSES, EmotionLabel
from signemo.weak_labeler import (
    CUE_WORDS,
    ConstantClassifier,
    KeywordClassifier,
    UniformClassifier,
    resolve_classifier,
    verify_classifier,
    weak_label,
)

JOY = EmotionLabel.JOY
NEU = EmotionLabel.NEUTRAL


def make_record(clip_id="c1", subtitle="hello there", labels=None):
    return ClipRecord(
        clip_id=clip_id,
        video_path=f"media/{clip_id}.mp4",
        signer_id="s01",
        subtitle_text=subtitle,
        start_s=0.0,
        end_s=1.0,
        fps=25.0,
        labels=labels or [],
    )


# ---------------------------------------------------------------------------
# Classifier stubs

def test_keyword_classifier_peaks_on_cued_class():
    clf = KeywordClassifier()
    for label, words in CUE_WORDS.items():
        for word in words:
            dist = clf.classify(f"that was truly {word} today")
            assert LABEL_ORDER[int(np.argmax(dist))] is label, word
            assert dist.max() >= 0.55
            assert dist.sum() == pytest.approx(1.0, abs=1e-9)


def test_keyword_classifier_defaults_to_neutral():
    dist = KeywordClassifier().classify("the weather report comes next")
    assert LABEL_ORDER[int(np.argmax(dist))] is NEU


def test_keyword_classifier_deterministic():
    clf = KeywordClassifier()
    a = clf.classify("some wonderful news")
    b = clf.classify("some wonderful news")
    assert np.array_equal(a, b)


def test_uniform_classifier_argmax_breaks_tie_to_first_label():
    dist = UniformClassifier().classify("anything")
    assert np.all(dist == dist[0])
    assert LABEL_ORDER[int(np.argmax(dist))] is EmotionLabel.ANGER


def test_constant_classifier_is_one_hot():
    dist = ConstantClassifier(label=JOY).classify("x")
    assert dist[LABEL_ORDER.index(JOY)] == 1.0
    assert dist.sum() == 1.0


def test_resolve_classifier_ids():
    assert resolve_classifier("stub-keyword").model_id == "stub-keyword"
    assert resolve_classifier("stub-uniform").model_id == "stub-uniform"
    assert resolve_classifier("stub-constant:joy").model_id == "stub-constant:joy"
    with pytest.raises(ValueError, match="stub-keyword"):
        resolve_classifier("bogus")


# ---------------------------------------------------------------------------
# weak_label pipeline

def test_weak_label_attaches_provenance_and_confidence():
    records = [make_record("c1", "such wonderful news"), make_record("c2", "plain text")]
    out, run = weak_label(records, KeywordClassifier())
    assert run.records_labeled == 2
    assert run.model_id == "stub-keyword"
    assert out[0].label_from(LabelSource.TER_WEAK) is JOY
    assert out[1].label_from(LabelSource.TER_WEAK) is NEU
    for rec in out:
        (_, prov), = [p for p in rec.labels if p[1].source is LabelSource.TER_WEAK]
        assert 0.0 <= prov.confidence <= 1.0
    assert run.class_counts[JOY] == 1
    assert run.class_counts[NEU] == 1


def test_weak_label_never_mutates_inputs_or_other_labels():
    existing = [
        (JOY, LabelProvenance(source=LabelSource.CONSENSUS)),
        (NEU, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a1")),
    ]
    rec = make_record("c1", "heartbroken about it", labels=existing)
    out, _ = weak_label([rec], KeywordClassifier())
    assert rec.labels == existing  # input untouched
    assert out[0].label_from(LabelSource.CONSENSUS) is JOY
    assert out[0].label_from(LabelSource.ANNOTATOR, "a1") is NEU
    assert out[0].label_from(LabelSource.TER_WEAK) is EmotionLabel.SADNESS


def test_weak_label_skips_missing_subtitles():
    records = [make_record("c1", None), make_record("c2", "gross stuff")]
    out, run = weak_label(records, KeywordClassifier())
    assert run.skipped_no_subtitle == 1
    assert run.records_labeled == 1
    assert out[0].labels == []
    assert out[1].label_from(LabelSource.TER_WEAK) is EmotionLabel.DISGUST


def test_weak_label_confidence_threshold():
    records = [make_record(f"c{i}", f"filler sentence number {i}") for i in range(20)]
    out_all, run_all = weak_label(records, KeywordClassifier())
    out_cut, run_cut = weak_label(records, KeywordClassifier(), min_confidence=0.75)
    assert run_all.records_labeled == 20
    assert run_cut.records_labeled + run_cut.skipped_low_confidence == 20
    assert run_cut.skipped_low_confidence > 0  # peak varies in [0.55, 0.95)
    assert run_cut.records_labeled > 0
    kept = {r.clip_id for r in out_cut if r.label_from(LabelSource.TER_WEAK) is not None}
    for rec, orig in zip(out_all, records):
        del orig
        (_, prov), = [p for p in rec.labels if p[1].source is LabelSource.TER_WEAK]
        assert (rec.clip_id in kept) == (prov.confidence >= 0.75)


def test_weak_label_uniform_ties_resolve_to_anger():
    out, _ = weak_label([make_record("c1")], UniformClassifier())
    assert out[0].label_from(LabelSource.TER_WEAK) is EmotionLabel.ANGER


def test_weak_label_runs_are_repeatable():
    records = [make_record(f"c{i}", f"sentence {i} is astonishing") for i in range(10)]
    out1, run1 = weak_label(records, KeywordClassifier())
    out2, run2 = weak_label(records, KeywordClassifier())
    assert out1 == out2
    assert run1.to_dict() == run2.to_dict()


def test_weak_label_parallel_matches_serial():
    records = [make_record(f"c{i}", f"sentence {i} is shocking news") for i in range(12)]
    serial, _ = weak_label(records, KeywordClassifier(), jobs=1)
    parallel, _ = weak_label(records, KeywordClassifier(), jobs=4)
    assert serial == parallel


def test_weak_label_partial_failure_skips_only_the_failed_record():
    class Flaky:
        model_id = "flaky"
        concurrent_safe = True

        def classify(self, text):
            if "boom" in text:
                raise RuntimeError("model crashed")
            return ConstantClassifier(label=JOY).classify(text)

    records = [make_record("c1", "fine"), make_record("c2", "boom"), make_record("c3", "fine too")]
    out, run = weak_label(records, Flaky())
    assert run.records_labeled == 2
    assert len(run.failures) == 1
    assert "c2" in run.failures[0]
    assert out[1].labels == []


def test_weak_label_total_failure_raises():
    class Broken:
        model_id = "broken"
        concurrent_safe = True

        def classify(self, text):
            raise RuntimeError("no weights")

    with pytest.raises(RuntimeError, match="all 2"):
        weak_label([make_record("c1"), make_record("c2")], Broken())


def test_weak_label_rejects_invalid_distributions():
    class Bad:
        model_id = "bad"
        concurrent_safe = True

        def classify(self, text):
            return np.full(N_CLASSES, 0.5)  # sums to 3.5

    records = [make_record("c1"), make_record("c2")]
    with pytest.raises(RuntimeError):
        weak_label(records, Bad())


# ---------------------------------------------------------------------------
# Verification against gold

def test_verify_classifier_scores_against_consensus():
    gold = [
        make_record("g1", "such wonderful news", [(JOY, LabelProvenance(source=LabelSource.CONSENSUS))]),
        make_record("g2", "plain remark", [(NEU, LabelProvenance(source=LabelSource.CONSENSUS))]),
        make_record(
            "g3",
            "utterly heartbroken",
            [(EmotionLabel.SADNESS, LabelProvenance(source=LabelSource.CONSENSUS))],
        ),
    ]
    report = verify_classifier(KeywordClassifier(), gold)
    assert report.n == 3
    assert report.wacc_percent == pytest.approx(100.0)


def test_verify_classifier_requires_consensus_and_subtitles():
    with pytest.raises(ValueError, match="consensus"):
        verify_classifier(KeywordClassifier(), [make_record("g1", "text")])
    labeled_no_text = make_record(
        "g2", None, [(JOY, LabelProvenance(source=LabelSource.CONSENSUS))]
    )
    with pytest.raises(ValueError, match="subtitle"):
        verify_classifier(KeywordClassifier(), [labeled_no_text])
