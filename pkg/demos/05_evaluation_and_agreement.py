"""Classifier metrics and inter-annotator agreement.

Two separate questions share this module: how good are a model's
predictions (weighted accuracy, macro F1, confusion matrix), and how
much do two human annotators agree (observed agreement and Gwet's AC1,
which corrects for chance without punishing skewed label distributions).
"""

import numpy as np

from signemo.corpus import ClipRecord, LabelProvenance, LabelSource
from signemo.evaluation import (
    consensus_subset,
    evaluate,
    format_report,
    gwet_ac1,
)
from signemo.labels import EmotionLabel, LABEL_ORDER

rng = np.random.default_rng(17)

# --- model evaluation ----------------------------------------------------
# Simulate a decent-but-imperfect classifier: 75% correct, errors uniform.
gold = [LABEL_ORDER[i % 7] for i in range(140)]
pairs = []
for g in gold:
    if rng.random() < 0.75:
        pairs.append((g, g))
    else:
        wrong = [l for l in LABEL_ORDER if l is not g]
        pairs.append((g, wrong[rng.integers(6)]))

report = evaluate(pairs)
print(format_report(report))

# --- inter-annotator agreement -------------------------------------------
# Two annotators who agree on most clips. AC1 stays interpretable even
# though the label distribution is far from uniform.
ids = [f"clip{i:03d}" for i in range(60)]
a_labels = [EmotionLabel.NEUTRAL] * 40 + [EmotionLabel.JOY] * 12 + [EmotionLabel.SADNESS] * 8
b_labels = list(a_labels)
for i in (3, 17, 29, 41, 55):  # five disagreements
    b_labels[i] = EmotionLabel.SURPRISE

agreement = gwet_ac1(a_labels, b_labels, item_ids=ids)
print(f"agreement over {agreement.n} clips: "
      f"p_o {agreement.p_o:.4f}, p_e {agreement.p_e:.4f}, AC1 {agreement.ac1:.4f}")
print(f"consensus on {len(agreement.consensus_ids)} clips")

# --- consensus extraction from a doubly-annotated manifest ----------------
def doubly_annotated(clip_id: str, a: EmotionLabel, b: EmotionLabel) -> ClipRecord:
    return ClipRecord(
        clip_id=clip_id, video_path=f"{clip_id}.mp4", signer_id="s01",
        subtitle_text="", start_s=0.0, end_s=1.0, fps=25.0,
        labels=[
            (a, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a1")),
            (b, LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id="a2")),
        ],
    )


records = [
    doubly_annotated("c0", EmotionLabel.JOY, EmotionLabel.JOY),
    doubly_annotated("c1", EmotionLabel.FEAR, EmotionLabel.SURPRISE),  # disagreement
    doubly_annotated("c2", EmotionLabel.NEUTRAL, EmotionLabel.NEUTRAL),
]
consensus = consensus_subset(records, "a1", "a2")
kept = [r.clip_id for r in consensus.records]
print(f"\nconsensus subset keeps {kept}, drops {sorted(consensus.disagreement_ids)}")
label, prov = consensus.records[0].labels[-1]
print(f"kept records gain a consensus label: {label.value} ({prov.source.value})")
