"""Weak labeling from subtitle text.

Subtitles often telegraph the signer's emotion ("furious", "wonderful",
"terrified"). The keyword classifier turns each subtitle into a class
distribution; weak_label keeps the argmax when it clears a confidence
floor and reports exactly what happened to every record.
"""

import tempfile
from pathlib import Path

from signemo.corpus import load_manifest, save_manifest
from signemo.synth import synthesize_fixtures
from signemo.weak_labeler import KeywordClassifier, weak_label

work = Path(tempfile.mkdtemp(prefix="signemo-demo-"))

# Synthetic fixtures: the train manifest has cue-laden subtitles and no
# labels yet — the starting point for weak supervision.
fixtures = synthesize_fixtures(work / "fixtures", seed=11, n_train=42)
records = load_manifest(fixtures.train_path)
print(f"corpus: {len(records)} unlabeled clips, e.g. {records[0].subtitle_text!r}")

clf = KeywordClassifier()
print(f"classifier: {clf.model_id}")

# Without a confidence floor every clip with a subtitle gets a label.
labeled, run = weak_label(records, clf)
print(f"\nno floor: {run.records_labeled} labeled, "
      f"{run.skipped_no_subtitle} without subtitles")

# A floor trades coverage for precision: low-confidence argmaxes are
# dropped rather than written into the manifest.
strict_labeled, strict_run = weak_label(records, clf, min_confidence=0.6)
print(f"floor 0.6: {strict_run.records_labeled} labeled, "
      f"{strict_run.skipped_low_confidence} below the floor")

print("\nclass counts at floor 0.6:")
for label in sorted(strict_run.class_counts, key=lambda l: l.value):
    print(f"  {label.value:<9} {strict_run.class_counts[label]}")

# The labeled manifest is an ordinary corpus file downstream steps consume.
out = work / "weak.jsonl"
save_manifest(strict_labeled, out)
reloaded = load_manifest(out)
weak_tagged = sum(1 for r in reloaded if r.labels)
print(f"\nwrote {out.name}: {len(reloaded)} records, {weak_tagged} carrying a weak label")
example = next(r for r in reloaded if r.labels)
label, prov = example.labels[0]
print(f"example: {example.clip_id} -> {label.value} "
      f"(source {prov.source.value}, confidence {prov.confidence:.2f})")
