"""Weak emotion labels from subtitle text via a pluggable text classifier.

The production-scale workflow runs a pretrained text emotion model over every
subtitle-aligned clip and stores the argmax as a ter_weak label. Classifiers
are plugins behind a tiny interface; deterministic stubs ship with the
package so pipelines and tests never depend on downloaded weights.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .corpus import ClipRecord, LabelProvenance, LabelSource
from .evaluation import EvaluationReport, evaluate
from .labels import LABEL_INDEX, LABEL_ORDER, N_CLASSES, EmotionLabel

log = logging.getLogger(__name__)

_DIST_TOL = 1e-6


@runtime_checkable
class TextEmotionClassifier(Protocol):
    """Maps text to a probability distribution over the 7 labels.

    The returned vector is aligned to the canonical label order, non-negative,
    and sums to 1 within 1e-6. Implementations declare concurrent_safe=False
    to make the pipeline serialize calls around them.
    """

    model_id: str
    concurrent_safe: bool

    def classify(self, text: str) -> np.ndarray:
        ...


def _stable_unit_hash(text: str) -> float:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") / 2**32


class ConstantClassifier:
    """Stub: the same one-hot (or given) distribution for every text."""

    concurrent_safe = True

    def __init__(self, label: EmotionLabel | None = None, distribution: np.ndarray | None = None):
        if distribution is not None:
            self._dist = np.asarray(distribution, dtype=np.float64)
            self.model_id = "stub-constant-dist"
        elif label is not None:
            self._dist = np.zeros(N_CLASSES)
            self._dist[LABEL_INDEX[label]] = 1.0
            self.model_id = f"stub-constant:{label.value}"
        else:
            raise ValueError("give either a label or a distribution")

    def classify(self, text: str) -> np.ndarray:
        return self._dist.copy()


class UniformClassifier:
    """Stub: uniform distribution; argmax resolves to the first label in order."""

    concurrent_safe = True
    model_id = "stub-uniform"

    def classify(self, text: str) -> np.ndarray:
        return np.full(N_CLASSES, 1.0 / N_CLASSES)


CUE_WORDS: dict[EmotionLabel, tuple[str, ...]] = {
    EmotionLabel.ANGER: ("furious", "outraged", "angry", "infuriating"),
    EmotionLabel.DISGUST: ("revolting", "disgusting", "repulsive", "gross"),
    EmotionLabel.FEAR: ("terrified", "frightening", "scared", "dreading"),
    EmotionLabel.JOY: ("wonderful", "delighted", "cheering", "overjoyed"),
    EmotionLabel.SADNESS: ("heartbroken", "mourning", "hopeless", "grieving"),
    EmotionLabel.SURPRISE: ("astonishing", "unexpected", "shocking", "stunned"),
}


class KeywordClassifier:
    """Deterministic stub: emotion cue words drive a peaked distribution.

    Texts without a cue word land on neutral. Peak mass varies with a stable
    hash of the text so confidence thresholds have something to bite on.
    """

    concurrent_safe = True
    model_id = "stub-keyword"

    def classify(self, text: str) -> np.ndarray:
        lowered = text.lower()
        hit = EmotionLabel.NEUTRAL
        for label, words in CUE_WORDS.items():
            if any(w in lowered for w in words):
                hit = label
                break
        peak = 0.55 + 0.4 * _stable_unit_hash(text)
        dist = np.full(N_CLASSES, (1.0 - peak) / (N_CLASSES - 1))
        dist[LABEL_INDEX[hit]] = peak
        return dist


class HuggingFaceTextClassifier:
    """Optional adapter for a pretrained text emotion model.

    Requires the 'ter' extra (transformers + torch) and downloads weights on
    first use; nothing in the package or tests depends on it. The default
    checkpoint already emits the seven taxonomy labels.
    """

    concurrent_safe = False

    def __init__(self, model_name: str = "michellejieli/emotion_text_classifier"):
        from transformers import pipeline  # deferred heavy import

        self.model_id = f"hf:{model_name}"
        self._pipe = pipeline("text-classification", model=model_name, top_k=None)

    def classify(self, text: str) -> np.ndarray:
        scores = self._pipe(text)[0]
        dist = np.zeros(N_CLASSES)
        for entry in scores:
            label = EmotionLabel(entry["label"].lower())
            dist[LABEL_INDEX[label]] = float(entry["score"])
        total = dist.sum()
        if total <= 0:
            raise ValueError(f"classifier returned no scores for {text!r}")
        return dist / total


def resolve_classifier(model_id: str) -> TextEmotionClassifier:
    """Instantiate a classifier from its id string (CLI surface)."""
    if model_id == "stub-keyword":
        return KeywordClassifier()
    if model_id == "stub-uniform":
        return UniformClassifier()
    if model_id.startswith("stub-constant:"):
        return ConstantClassifier(label=EmotionLabel(model_id.split(":", 1)[1]))
    if model_id.startswith("hf:"):
        return HuggingFaceTextClassifier(model_name=model_id.split(":", 1)[1])
    raise ValueError(
        f"unknown model id {model_id!r}; expected stub-keyword, stub-uniform, "
        f"stub-constant:<label>, or hf:<checkpoint>"
    )


# ---------------------------------------------------------------------------

@dataclass
class WeakLabelRun:
    model_id: str
    records_labeled: int = 0
    class_counts: dict[EmotionLabel, int] = field(default_factory=lambda: {l: 0 for l in LABEL_ORDER})
    skipped_no_subtitle: int = 0
    skipped_low_confidence: int = 0
    failures: list[str] = field(default_factory=list)
    manifest_out: str | None = None

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "records_labeled": self.records_labeled,
            "class_counts": {l.value: c for l, c in self.class_counts.items()},
            "skipped_no_subtitle": self.skipped_no_subtitle,
            "skipped_low_confidence": self.skipped_low_confidence,
            "failures": self.failures,
            "manifest_out": self.manifest_out,
        }


def _validated_distribution(dist: np.ndarray) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.shape != (N_CLASSES,):
        raise ValueError(f"distribution must have shape ({N_CLASSES},), got {dist.shape}")
    if np.any(dist < 0) or abs(float(dist.sum()) - 1.0) > _DIST_TOL:
        raise ValueError(f"distribution must be non-negative and sum to 1, got sum={dist.sum()}")
    return dist


def weak_label(
    records: Sequence[ClipRecord],
    clf: TextEmotionClassifier,
    min_confidence: float | None = None,
    jobs: int = 1,
) -> tuple[list[ClipRecord], WeakLabelRun]:
    """Attach one ter_weak label per subtitled record.

    The label is the classifier argmax (ties broken by the fixed label order)
    and the confidence is the max probability. Records without subtitles are
    passed through untouched and counted; a classifier failure skips just that
    record unless every classified record fails.
    """
    run = WeakLabelRun(model_id=clf.model_id)

    def classify_one(rec: ClipRecord) -> np.ndarray | Exception:
        try:
            return _validated_distribution(clf.classify(rec.subtitle_text))
        except Exception as exc:
            return exc

    with_subtitles = [rec for rec in records if rec.subtitle_text]
    if jobs > 1 and getattr(clf, "concurrent_safe", False):
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = dict(zip((r.clip_id for r in with_subtitles),
                                pool.map(classify_one, with_subtitles)))
    else:
        outcomes = {rec.clip_id: classify_one(rec) for rec in with_subtitles}

    out: list[ClipRecord] = []
    attempted = 0
    for rec in records:
        if not rec.subtitle_text:
            run.skipped_no_subtitle += 1
            out.append(rec)
            continue
        attempted += 1
        result = outcomes[rec.clip_id]
        if isinstance(result, Exception):
            run.failures.append(f"{rec.clip_id}: {result}")
            log.warning("weak-label failure on %s: %s", rec.clip_id, result)
            out.append(rec)
            continue
        confidence = float(result.max())
        if min_confidence is not None and confidence < min_confidence:
            run.skipped_low_confidence += 1
            out.append(rec)
            continue
        label = LABEL_ORDER[int(np.argmax(result))]
        out.append(
            rec.with_label(label, LabelProvenance(source=LabelSource.TER_WEAK, confidence=confidence))
        )
        run.records_labeled += 1
        run.class_counts[label] += 1

    if attempted > 0 and len(run.failures) == attempted:
        raise RuntimeError(f"classifier {clf.model_id!r} failed on all {attempted} records")
    return out, run


def verify_classifier(
    clf: TextEmotionClassifier,
    gold: Sequence[ClipRecord],
) -> EvaluationReport:
    """Score a classifier's argmax against consensus labels on a gold set."""
    pairs: list[tuple[EmotionLabel, EmotionLabel]] = []
    for rec in gold:
        consensus = rec.label_from(LabelSource.CONSENSUS)
        if consensus is None:
            raise ValueError(f"clip {rec.clip_id!r} has no consensus label")
        if not rec.subtitle_text:
            raise ValueError(f"clip {rec.clip_id!r} has no subtitle text")
        dist = _validated_distribution(clf.classify(rec.subtitle_text))
        pairs.append((consensus, LABEL_ORDER[int(np.argmax(dist))]))
    if not pairs:
        raise ValueError("gold set is empty")
    return evaluate(pairs)
