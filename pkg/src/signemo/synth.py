"""Synthetic datasets and fixtures.

Real corpora in this domain are access-restricted, so tests, demos, and the
end-to-end pipeline run against generated stand-ins: a fake subtitle corpus
whose sentences carry emotion cue words, manifests and splits shaped like the
real ones, a scaled-down base checkpoint, and in-memory separable sequence
sets for training smoke tests. Everything is a pure function of its seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    ClipRecord,
    DatasetSplit,
    LabelProvenance,
    LabelSource,
    SplitName,
    save_manifest,
    save_splits,
)
from .labels import LABEL_ORDER, N_CLASSES, EmotionLabel
from .model import ModelCheckpoint, ModelConfig, init_parameters, save_checkpoint
from .weak_labeler import CUE_WORDS

# Sentence frames for cue-bearing subtitles. None of them contain cue words
# themselves, so the classification of a generated sentence is driven only by
# the inserted cue.
_CUED_TEMPLATES = (
    "Neighbours called the decision {} from the very start.",
    "It was {} to watch the ceremony unfold.",
    "The report described the scene as {}.",
    "Everyone at the meeting found the news {}.",
    "By the evening the whole town felt it was {}.",
)

_NEUTRAL_SENTENCES = (
    "The council will publish the timetable on Monday.",
    "He parked the van beside the old market hall.",
    "The forecast mentions light rain across the coast.",
    "Crews repaired the bridge before the service began.",
    "The library opens an hour later during winter.",
)


def subtitle_for(label: EmotionLabel, rng: np.random.Generator) -> str:
    """One synthetic subtitle whose cue word points at the given class."""
    if label is EmotionLabel.NEUTRAL:
        return _NEUTRAL_SENTENCES[int(rng.integers(0, len(_NEUTRAL_SENTENCES)))]
    cue = CUE_WORDS[label][int(rng.integers(0, len(CUE_WORDS[label])))]
    template = _CUED_TEMPLATES[int(rng.integers(0, len(_CUED_TEMPLATES)))]
    return template.format(cue)


def _make_record(
    clip_id: str,
    true_label: EmotionLabel,
    rng: np.random.Generator,
    fps: float,
    labels: list[tuple[EmotionLabel, LabelProvenance]] | None = None,
) -> ClipRecord:
    duration = 1.0 + 1.6 * float(rng.random())
    return ClipRecord(
        clip_id=clip_id,
        video_path=f"media/{clip_id}.mp4",
        signer_id=f"s{int(rng.integers(1, 5)):02d}",
        subtitle_text=subtitle_for(true_label, rng),
        start_s=0.0,
        end_s=round(duration, 3),
        fps=fps,
        labels=labels or [],
    )


@dataclass
class FixtureSet:
    corpus_path: Path
    splits_path: Path
    train_path: Path
    eval_path: Path
    held_out_path: Path
    base_checkpoint_path: Path
    n_train: int
    n_eval: int
    n_held_out: int


def synthesize_fixtures(
    out_dir: str | Path,
    seed: int = 0,
    n_train: int = 49,
    n_eval: int = 21,
    n_held_out: int = 7,
    fps: float = 25.0,
    disagreement_rate: float = 0.15,
    hidden1: int = 64,
    hidden2: int = 32,
) -> FixtureSet:
    """Write a complete synthetic dataset into out_dir.

    Train and held-out clips carry only cue-bearing subtitles (labels come
    later from the weak labeler). Eval clips additionally carry two annotator
    labels and, where those agree, a consensus label; their subtitles are cued
    to the same class so frame synthesis and text agree. The base checkpoint
    is a seeded initialization in a scaled-down profile (full 596-d input,
    small hidden sizes) so fine-tuning runs are fast.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    train: list[ClipRecord] = []
    for i in range(n_train):
        label = LABEL_ORDER[i % N_CLASSES]
        train.append(_make_record(f"synth_train_{i:04d}", label, rng, fps))

    held_out: list[ClipRecord] = []
    for i in range(n_held_out):
        label = LABEL_ORDER[i % N_CLASSES]
        held_out.append(_make_record(f"synth_held_{i:04d}", label, rng, fps))

    eval_records: list[ClipRecord] = []
    for i in range(n_eval):
        true = LABEL_ORDER[i % N_CLASSES]
        label_b = true
        if rng.random() < disagreement_rate:
            others = [l for l in LABEL_ORDER if l is not true]
            label_b = others[int(rng.integers(0, len(others)))]
        labels: list[tuple[EmotionLabel, LabelProvenance]] = []
        if label_b is true:
            labels.append((true, LabelProvenance(source=LabelSource.CONSENSUS)))
        labels.append((true, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a1")))
        labels.append((label_b, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a2")))
        eval_records.append(_make_record(f"synth_eval_{i:04d}", true, rng, fps, labels=labels))

    everything = train + held_out + eval_records
    corpus_path = out_dir / "corpus.jsonl"
    save_manifest(everything, corpus_path)
    splits_path = out_dir / "splits.jsonl"
    save_splits(
        [
            DatasetSplit(name=SplitName.TRAIN, clip_ids={r.clip_id for r in train}),
            DatasetSplit(name=SplitName.HELD_OUT, clip_ids={r.clip_id for r in held_out}),
            DatasetSplit(name=SplitName.EVAL, clip_ids={r.clip_id for r in eval_records}),
        ],
        splits_path,
    )
    train_path = out_dir / "train.jsonl"
    save_manifest(train, train_path)
    eval_path = out_dir / "eval.jsonl"
    save_manifest(eval_records, eval_path)
    held_out_path = out_dir / "held_out.jsonl"
    save_manifest(held_out, held_out_path)

    config = ModelConfig(hidden1=hidden1, hidden2=hidden2)
    ckpt = ModelCheckpoint(
        config=config,
        parameters=init_parameters(config, seed),
        training_meta={"epochs": 0, "seed": seed, "source_manifests": []},
    )
    base_checkpoint_path = out_dir / "base.ckpt"
    save_checkpoint(ckpt, base_checkpoint_path)

    return FixtureSet(
        corpus_path=corpus_path,
        splits_path=splits_path,
        train_path=train_path,
        eval_path=eval_path,
        held_out_path=held_out_path,
        base_checkpoint_path=base_checkpoint_path,
        n_train=n_train,
        n_eval=n_eval,
        n_held_out=n_held_out,
    )


# ---------------------------------------------------------------------------
# In-memory sequence sets for training smoke tests

def class_directions(input_dim: int, directions_seed: int = 0) -> np.ndarray:
    """The 7 unit mean directions shared by the sequence generators below."""
    rng = np.random.default_rng(directions_seed)
    directions = rng.standard_normal((N_CLASSES, input_dim))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def separable_sequences(
    n_per_class: int,
    t_frames: int = 16,
    t_jitter: int = 4,
    input_dim: int = 24,
    noise: float = 1.0,
    seed: int = 0,
    directions_seed: int = 0,
) -> tuple[list[np.ndarray], list[EmotionLabel]]:
    """Sequences of white noise around one fixed direction per class.

    The class directions are well separated for moderate noise, so a working
    training loop reaches high accuracy quickly; lengths jitter so padding and
    masking get exercised. Sets generated with different seeds but the same
    directions_seed share the class geometry, so one can serve as held-out
    data for the other.
    """
    rng = np.random.default_rng(seed)
    directions = class_directions(input_dim, directions_seed)
    sequences: list[np.ndarray] = []
    labels: list[EmotionLabel] = []
    for class_idx, label in enumerate(LABEL_ORDER):
        for _ in range(n_per_class):
            t = t_frames + int(rng.integers(0, t_jitter + 1))
            seq = directions[class_idx] + noise * rng.standard_normal((t, input_dim))
            sequences.append(seq)
            labels.append(label)
    order = rng.permutation(len(sequences))
    return [sequences[i] for i in order], [labels[i] for i in order]


def imbalanced_sequences(
    n_majority: int,
    n_per_minority: int,
    majority: EmotionLabel = EmotionLabel.NEUTRAL,
    t_frames: int = 16,
    t_jitter: int = 4,
    input_dim: int = 24,
    noise: float = 1.0,
    seed: int = 0,
    directions_seed: int = 0,
) -> tuple[list[np.ndarray], list[EmotionLabel]]:
    """Same generative family as separable_sequences, heavily skewed to one class."""
    rng = np.random.default_rng(seed)
    directions = class_directions(input_dim, directions_seed)
    sequences: list[np.ndarray] = []
    labels: list[EmotionLabel] = []
    for class_idx, label in enumerate(LABEL_ORDER):
        count = n_majority if label is majority else n_per_minority
        for _ in range(count):
            t = t_frames + int(rng.integers(0, t_jitter + 1))
            sequences.append(directions[class_idx] + noise * rng.standard_normal((t, input_dim)))
            labels.append(label)
    order = rng.permutation(len(sequences))
    return [sequences[i] for i in order], [labels[i] for i in order]
