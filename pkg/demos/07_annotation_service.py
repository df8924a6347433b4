"""The annotation workflow, driven in-process.

The same store that backs the HTTP service (single-key labeling, an
append-only event log, per-annotator task queues, dedupe, consensus and
agreement on export) works as a plain Python object. Two annotators
label a small manifest, disagree once, and the export shows exactly
what a study coordinator would pull at the end of a session.

To run the real server instead:  python3 -m signemo.cli annotate-serve
  --manifest corpus.jsonl --log events.jsonl --annotators a1,a2
"""

import json
import tempfile
from pathlib import Path

from signemo.annotation_service import KEYMAP, AnnotationEvent, AnnotationStore
from signemo.corpus import ClipRecord

work = Path(tempfile.mkdtemp(prefix="signemo-demo-"))

records = [
    ClipRecord(clip_id=f"c{i}", video_path=f"c{i}.mp4", signer_id="s01",
               subtitle_text=f"sentence number {i}", start_s=0.0, end_s=2.0, fps=25.0)
    for i in range(4)
]
store = AnnotationStore(records, log_path=work / "events.jsonl", annotators=["a1", "a2"])

print("keymap:", {k: v.value for k, v in KEYMAP.items()})

# Each annotator labels every clip with one keypress. They disagree on c2.
plans = {
    "a1": {"c0": "j", "c1": "s", "c2": "f", "c3": "n"},
    "a2": {"c0": "j", "c1": "s", "c2": "u", "c3": "n"},
}
for annotator, plan in plans.items():
    session = store.register(annotator)
    print(f"\n{annotator} registered (token {session['token'][:6]}..., "
          f"{session['progress']['total']} tasks)")
    while True:
        nxt = store.next_task(annotator)
        if nxt["done"]:
            break
        task = nxt["task"]
        key = plan[task["clip_id"]]
        result = store.submit(AnnotationEvent(
            clip_id=task["clip_id"], annotator_id=annotator,
            label=KEYMAP[key], key_pressed=key,
        ), token=session["token"])
        print(f"  {task['clip_id']} ({task['subtitle_text']!r}) "
              f"-> {result['label']}  [{result['progress']['done']}"
              f"/{result['progress']['total']}]")

# Pressing the same key again is a no-op; a different key relabels.
again = store.submit(AnnotationEvent(
    clip_id="c0", annotator_id="a1", label=KEYMAP["j"], key_pressed="j"))
print(f"\nsame key twice: duplicate={again['duplicate']}, stored={again['stored']}")

# The export bundles per-annotator manifests, the consensus subset, and
# chance-corrected agreement.
export = store.export()
consensus = export["consensus"]
agreement = export["agreement"]
print(f"\nexport: {export['total_tasks']} tasks, annotators {export['annotators']}")
print(f"consensus on {consensus['n']} clips "
      f"(disagreements: {consensus['disagreement_ids']})")
print(f"agreement: p_o {agreement['p_o']:.3f}, AC1 {agreement['ac1']:.3f}")

# Every keypress — including the duplicate attempt — is in the audit log.
events = [json.loads(line) for line in (work / "events.jsonl").read_text().splitlines()]
labels = [e for e in events if e.get("type") == "label"]
print(f"\naudit log: {len(events)} events, {len(labels)} label rows")
