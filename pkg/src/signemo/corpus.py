"""Clip/label data model and the line-delimited manifest format.

A manifest is one JSON object per line, one line per clip. Splits live in a
separate line-delimited file so that manifests stay streamable at the scale
of ~100k clips. All other modules consume these records.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .labels import LABEL_ORDER, EmotionLabel, parse_label


class ManifestError(ValueError):
    """Raised for malformed manifest/split files or invariant violations."""


class LabelSource(enum.Enum):
    GOLD_ACTED = "gold_acted"
    TER_WEAK = "ter_weak"
    ANNOTATOR = "annotator"
    CONSENSUS = "consensus"
    MODEL_PREDICTION = "model_prediction"

    def __str__(self) -> str:
        return self.value


# Sources whose labels carry a confidence score.
_CONFIDENCE_SOURCES = frozenset({LabelSource.TER_WEAK, LabelSource.MODEL_PREDICTION})


@dataclass(frozen=True)
class LabelProvenance:
    """Where a label came from.

    annotator_id is present exactly for annotator labels; confidence is
    present exactly for ter_weak and model_prediction labels.
    """

    source: LabelSource
    annotator_id: str | None = None
    confidence: float | None = None

    def __post_init__(self) -> None:
        if (self.annotator_id is not None) != (self.source is LabelSource.ANNOTATOR):
            raise ManifestError(
                f"annotator_id must be present iff source is 'annotator' (got source={self.source}, "
                f"annotator_id={self.annotator_id!r})"
            )
        if (self.confidence is not None) != (self.source in _CONFIDENCE_SOURCES):
            raise ManifestError(
                f"confidence must be present iff source is ter_weak or model_prediction "
                f"(got source={self.source}, confidence={self.confidence!r})"
            )
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ManifestError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class ClipRecord:
    """One subtitle-aligned video clip with zero or more labels."""

    clip_id: str
    video_path: str
    signer_id: str
    subtitle_text: str | None
    start_s: float
    end_s: float
    fps: float
    labels: list[tuple[EmotionLabel, LabelProvenance]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.start_s = float(self.start_s)
        self.end_s = float(self.end_s)
        self.fps = float(self.fps)
        self.validate()

    def validate(self) -> None:
        if not self.clip_id:
            raise ManifestError("clip_id must be non-empty")
        if self.start_s < 0:
            raise ManifestError(f"clip {self.clip_id!r}: start_s must be >= 0, got {self.start_s}")
        if self.end_s <= self.start_s:
            raise ManifestError(
                f"clip {self.clip_id!r}: end_s must be > start_s (got start_s={self.start_s}, end_s={self.end_s})"
            )
        if self.fps <= 0:
            raise ManifestError(f"clip {self.clip_id!r}: fps must be > 0, got {self.fps}")
        seen: set[tuple[LabelSource, str | None]] = set()
        for label, prov in self.labels:
            key = (prov.source, prov.annotator_id)
            if key in seen:
                raise ManifestError(
                    f"clip {self.clip_id!r}: more than one label for source={prov.source}, "
                    f"annotator_id={prov.annotator_id!r}"
                )
            seen.add(key)

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def label_from(self, source: LabelSource, annotator_id: str | None = None) -> EmotionLabel | None:
        for label, prov in self.labels:
            if prov.source is source and prov.annotator_id == annotator_id:
                return label
        return None

    def with_label(self, label: EmotionLabel, prov: LabelProvenance) -> "ClipRecord":
        """Return a copy carrying one extra label; existing labels are untouched."""
        rec = ClipRecord(
            clip_id=self.clip_id,
            video_path=self.video_path,
            signer_id=self.signer_id,
            subtitle_text=self.subtitle_text,
            start_s=self.start_s,
            end_s=self.end_s,
            fps=self.fps,
            labels=list(self.labels) + [(label, prov)],
        )
        return rec


class SplitName(enum.Enum):
    TRAIN = "train"
    HELD_OUT = "held_out"
    EVAL = "eval"

    def __str__(self) -> str:
        return self.value


@dataclass
class DatasetSplit:
    name: SplitName
    clip_ids: set[str]


# ---------------------------------------------------------------------------
# Manifest serialization (exact field names are part of the format contract)

def record_to_dict(rec: ClipRecord) -> dict:
    labels = []
    for label, prov in rec.labels:
        entry: dict = {"label": label.value, "source": prov.source.value}
        if prov.annotator_id is not None:
            entry["annotator_id"] = prov.annotator_id
        if prov.confidence is not None:
            entry["confidence"] = prov.confidence
        labels.append(entry)
    return {
        "clip_id": rec.clip_id,
        "video_path": rec.video_path,
        "signer_id": rec.signer_id,
        "subtitle_text": rec.subtitle_text,
        "start_s": rec.start_s,
        "end_s": rec.end_s,
        "fps": rec.fps,
        "labels": labels,
    }


def record_from_dict(obj: Mapping) -> ClipRecord:
    for key in ("clip_id", "video_path", "signer_id", "start_s", "end_s", "fps"):
        if key not in obj:
            raise ManifestError(f"record missing required field {key!r}")
    labels: list[tuple[EmotionLabel, LabelProvenance]] = []
    for entry in obj.get("labels", []):
        if "label" not in entry or "source" not in entry:
            raise ManifestError(f"clip {obj['clip_id']!r}: label entry missing 'label' or 'source'")
        try:
            source = LabelSource(entry["source"])
        except ValueError:
            known = ", ".join(s.value for s in LabelSource)
            raise ManifestError(
                f"clip {obj['clip_id']!r}: unknown label source {entry['source']!r}; expected one of: {known}"
            ) from None
        try:
            prov = LabelProvenance(
                source=source,
                annotator_id=entry.get("annotator_id"),
                confidence=entry.get("confidence"),
            )
            label = parse_label(entry["label"])
        except ValueError as exc:
            raise ManifestError(f"clip {obj['clip_id']!r}: {exc}") from None
        labels.append((label, prov))
    return ClipRecord(
        clip_id=str(obj["clip_id"]),
        video_path=str(obj["video_path"]),
        signer_id=str(obj["signer_id"]),
        subtitle_text=obj.get("subtitle_text"),
        start_s=obj["start_s"],
        end_s=obj["end_s"],
        fps=obj["fps"],
        labels=labels,
    )


def load_manifest(path: str | Path) -> list[ClipRecord]:
    """Load and validate a line-delimited manifest.

    Raises ManifestError with the offending line number on parse failures and
    with the clip_id on record-level invariant violations.
    """
    path = Path(path)
    records: list[ClipRecord] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                rec = record_from_dict(obj)
            except ManifestError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
            if rec.clip_id in seen_ids:
                raise ManifestError(f"{path}:{lineno}: duplicate clip_id {rec.clip_id!r}")
            seen_ids.add(rec.clip_id)
            records.append(rec)
    return records


def save_manifest(records: Iterable[ClipRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), ensure_ascii=False))
            fh.write("\n")


def load_splits(path: str | Path, known_clip_ids: set[str] | None = None) -> list[DatasetSplit]:
    """Load splits and check they are pairwise disjoint.

    When known_clip_ids is given, split members must be drawn from it.
    """
    path = Path(path)
    splits: list[DatasetSplit] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                name = SplitName(obj["name"])
            except (KeyError, ValueError):
                known = ", ".join(s.value for s in SplitName)
                raise ManifestError(
                    f"{path}:{lineno}: split name must be one of: {known}"
                ) from None
            splits.append(DatasetSplit(name=name, clip_ids=set(obj.get("clip_ids", []))))
    claimed: dict[str, SplitName] = {}
    for split in splits:
        for cid in split.clip_ids:
            if cid in claimed:
                raise ManifestError(
                    f"clip {cid!r} appears in both {claimed[cid]} and {split.name} splits"
                )
            claimed[cid] = split.name
            if known_clip_ids is not None and cid not in known_clip_ids:
                raise ManifestError(f"split {split.name} references unknown clip {cid!r}")
    return splits


def save_splits(splits: Iterable[DatasetSplit], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for split in splits:
            obj = {"name": split.name.value, "clip_ids": sorted(split.clip_ids)}
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


# ---------------------------------------------------------------------------
# External taxonomy mapping

@dataclass
class ExternalLabelMap:
    """Many-to-one mapping from an external dataset's label strings to our taxonomy."""

    entries: dict[str, EmotionLabel]

    def __post_init__(self) -> None:
        self.entries = {k.lower(): v for k, v in self.entries.items()}

    def lookup(self, external: str) -> EmotionLabel:
        key = external.strip().lower()
        if key not in self.entries:
            known = ", ".join(sorted(self.entries))
            raise KeyError(f"unknown external label {external!r}; known labels: {known}")
        return self.entries[key]


# The ten EmoSign single-expression categories. The source dataset spells
# happiness as "Happyness"; matching is case-insensitive either way.
EMOSIGN_LABEL_MAP = ExternalLabelMap(
    entries={
        "happyness": EmotionLabel.JOY,
        "sadness": EmotionLabel.SADNESS,
        "frustration": EmotionLabel.SADNESS,
        "anger": EmotionLabel.ANGER,
        "disgust": EmotionLabel.DISGUST,
        "fear": EmotionLabel.FEAR,
        "worry": EmotionLabel.FEAR,
        "surprise_pos": EmotionLabel.SURPRISE,
        "surprise_neg": EmotionLabel.SURPRISE,
        "neutral": EmotionLabel.NEUTRAL,
    }
)


def map_external_label(external: str, label_map: ExternalLabelMap = EMOSIGN_LABEL_MAP) -> EmotionLabel:
    """Map one external label string (case-insensitive) to the 7-class taxonomy."""
    return label_map.lookup(external)


def mapped_distribution(
    external_labels: Iterable[str],
    label_map: ExternalLabelMap = EMOSIGN_LABEL_MAP,
) -> dict[EmotionLabel, int]:
    """Per-class counts after mapping a set of external gold labels.

    Counts always cover all 7 classes and sum to the number of inputs.
    """
    counts = {lab: 0 for lab in LABEL_ORDER}
    for ext in external_labels:
        counts[label_map.lookup(ext)] += 1
    return counts


# ---------------------------------------------------------------------------
# Acted-corpus scaffolding

def build_acted_grid(
    utterance_ids: Sequence[str],
    signer_ids: Sequence[str],
    fps: float = 25.0,
    duration_s: float = 1.0,
) -> list[ClipRecord]:
    """Emit one stub record per (utterance, signer, emotion) triple.

    Used to validate and scaffold acted-corpus manifests where every
    utterance is performed by every signer in all seven emotional states.
    """
    if not utterance_ids:
        raise ValueError("utterance_ids must be non-empty")
    if not signer_ids:
        raise ValueError("signer_ids must be non-empty")
    records: list[ClipRecord] = []
    for utt in utterance_ids:
        for signer in signer_ids:
            for label in LABEL_ORDER:
                clip_id = f"{utt}_{signer}_{label.value}"
                records.append(
                    ClipRecord(
                        clip_id=clip_id,
                        video_path=f"media/{clip_id}.mp4",
                        signer_id=str(signer),
                        subtitle_text=None,
                        start_s=0.0,
                        end_s=duration_s,
                        fps=fps,
                        labels=[(label, LabelProvenance(source=LabelSource.GOLD_ACTED))],
                    )
                )
    return records
