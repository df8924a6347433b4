"""Manifests, label provenance, and external-taxonomy mapping.

Builds a tiny corpus by hand, round-trips it through the JSONL manifest
format, and shows the two corpus scaffolds: mapping an external dataset's
emotion categories onto the 7-class taxonomy, and generating the full
(utterance x signer x emotion) grid of an acted corpus.
"""

import tempfile
from pathlib import Path

from signemo.corpus import (
    ClipRecord,
    LabelProvenance,
    LabelSource,
    build_acted_grid,
    load_manifest,
    mapped_distribution,
    save_manifest,
)
from signemo.labels import LABEL_ORDER, EmotionLabel

work = Path(tempfile.mkdtemp(prefix="signemo-demo-"))

# One clip, labeled three ways: two human annotators and a weak text label.
# Multiple labels coexist; provenance says which to trust.
clip = ClipRecord(
    clip_id="bobsl_000123",
    video_path="media/bobsl_000123.mp4",
    signer_id="s07",
    subtitle_text="what a wonderful surprise for everyone",
    start_s=12.0,
    end_s=14.6,
    fps=25.0,
    labels=[
        (EmotionLabel.JOY, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a1")),
        (EmotionLabel.SURPRISE, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a2")),
        (EmotionLabel.JOY, LabelProvenance(source=LabelSource.TER_WEAK, confidence=0.81)),
    ],
)

manifest = work / "corpus.jsonl"
save_manifest([clip], manifest)
loaded = load_manifest(manifest)
print(f"round-tripped {len(loaded)} record(s); labels on {loaded[0].clip_id}:")
for label, prov in loaded[0].labels:
    who = f" by {prov.annotator_id}" if prov.annotator_id else ""
    conf = f" (confidence {prov.confidence})" if prov.confidence is not None else ""
    print(f"  {label.value:<9} from {prov.source.value}{who}{conf}")

# External single-expression counts, folded onto our seven classes. The
# source taxonomy is finer (worry, frustration, signed surprise polarity)
# and spells happiness "happyness"; lookup is case-insensitive.
external = (
    ["Happyness"] * 54 + ["Sadness"] * 10 + ["Frustration"] * 19 + ["Anger"] * 3
    + ["Disgust"] * 10 + ["Fear"] * 7 + ["Worry"] * 14
    + ["Surprise_pos"] * 5 + ["Surprise_neg"] * 7 + ["Neutral"] * 11
)
dist = mapped_distribution(external)
print(f"\n{len(external)} external labels fold onto the taxonomy as:")
for label in LABEL_ORDER:
    print(f"  {label.value:<9} {dist[label]:>3}")

# Acted corpora record every utterance by every signer in all seven states.
grid = build_acted_grid([f"u{i:02d}" for i in range(78)], ["s01", "s02"])
print(f"\nacted grid: 78 utterances x 2 signers x 7 emotions = {len(grid)} clips")
print(f"first cell: {grid[0].clip_id} ({grid[0].labels[0][0].value}, {grid[0].labels[0][1].source.value})")
