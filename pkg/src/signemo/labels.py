"""The closed seven-class emotion taxonomy shared by every pipeline stage."""

from __future__ import annotations

import enum


class EmotionLabel(enum.Enum):
    """Six basic emotions plus neutral.

    Members are declared in alphabetical order; that order is the canonical
    index order used for probability vectors, confusion matrices, and
    deterministic argmax tie-breaking everywhere in the package.
    """

    ANGER = "anger"
    DISGUST = "disgust"
    FEAR = "fear"
    JOY = "joy"
    NEUTRAL = "neutral"
    SADNESS = "sadness"
    SURPRISE = "surprise"

    def __str__(self) -> str:
        return self.value


LABEL_ORDER: tuple[EmotionLabel, ...] = tuple(EmotionLabel)
N_CLASSES = len(LABEL_ORDER)
LABEL_INDEX: dict[EmotionLabel, int] = {lab: i for i, lab in enumerate(LABEL_ORDER)}

# Column order used when formatting per-class tables for reports.
DISPLAY_ORDER: tuple[EmotionLabel, ...] = (
    EmotionLabel.JOY,
    EmotionLabel.SADNESS,
    EmotionLabel.ANGER,
    EmotionLabel.DISGUST,
    EmotionLabel.FEAR,
    EmotionLabel.SURPRISE,
    EmotionLabel.NEUTRAL,
)


def parse_label(value: str) -> EmotionLabel:
    """Parse a serialized label string; unknown strings are rejected."""
    try:
        return EmotionLabel(value.strip().lower())
    except ValueError:
        known = ", ".join(lab.value for lab in LABEL_ORDER)
        raise ValueError(f"unknown emotion label {value!r}; expected one of: {known}") from None
