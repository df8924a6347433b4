"""Zero-shot baseline: ask a vision-language model to label clips.

Each clip becomes a prompt (subtitle plus sampled frames) sent through a
transport. Here the transport replays recorded responses from a fixture
file, so the full pipeline — prompting, response parsing, retries,
failure accounting — runs without any network or API key.
"""

import json
import tempfile
from pathlib import Path

from signemo.corpus import ClipRecord
from signemo.features import SyntheticFrameProvider
from signemo.llm_baseline import (
    LlmEndpointConfig,
    RecordedFixtureTransport,
    build_prompt,
    llm_predict_manifest,
    parse_label_response,
)

work = Path(tempfile.mkdtemp(prefix="signemo-demo-"))

records = [
    ClipRecord(clip_id=f"c{i}", video_path=f"c{i}.mp4", signer_id="s01",
               subtitle_text=text, start_s=0.0, end_s=2.0, fps=25.0)
    for i, text in enumerate([
        "i cannot believe we won the cup",
        "the funeral is on tuesday",
        "there is a spider on your shoulder",
        "the bus arrives at nine",
    ])
]

# The prompt pins the answer format so parsing is a single-word match.
print("prompt for the first clip:")
print("  " + build_prompt(records[0]).splitlines()[-1])

# The parser tolerates case and trailing punctuation but refuses any
# answer that is not exactly one known label — hedging means no label.
for text in ("JOY", "sadness.", "I think fear", "maybe joy or surprise"):
    print(f"  parse {text!r:<28} -> {parse_label_response(text)}")

# Recorded answers stand in for a live endpoint. The list entry replays
# a flaky first call: unparsable text, then a clean retry.
fixture = work / "responses.json"
fixture.write_text(json.dumps({"responses": {
    "c0": "joy",
    "c1": ["no idea what this is", "sadness"],
    "c2": "fear",
    "c3": "neutral",
}}))

cfg = LlmEndpointConfig(provider_id="fixture", model_name="recorded-v0", retries=1)
run = llm_predict_manifest(
    records,
    frame_provider=SyntheticFrameProvider(seed=0),
    cfg=cfg,
    transport=RecordedFixtureTransport(fixture),
)

print(f"\npredicted {len(run.predictions)} of {len(records)} clips "
      f"({len(run.unparsable)} unparsable, {len(run.failed)} failed)")
for pred in run.predictions:
    print(f"  {pred.clip_id}: {pred.label.value}")
