// @vitest-environment node
import { type ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { AnnotatorSession } from "../src/session.js";

const KEYMAP: Record<string, string> = {
  a: "anger",
  d: "disgust",
  f: "fear",
  j: "joy",
  n: "neutral",
  s: "sadness",
  u: "surprise",
};

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const { port } = probe.address() as net.AddressInfo;
      probe.close(() => resolve(port));
    });
  });
}

function writeManifest(path: string, n: number): string[] {
  const ids: string[] = [];
  const lines: string[] = [];
  for (let i = 0; i < n; i++) {
    const clipId = `c${String(i).padStart(2, "0")}`;
    ids.push(clipId);
    lines.push(
      JSON.stringify({
        clip_id: clipId,
        video_path: `media/${clipId}.mp4`,
        signer_id: "s01",
        subtitle_text: `sentence number ${i}`,
        start_s: 0.0,
        end_s: 1.5,
        fps: 25.0,
        labels: [],
      }),
    );
  }
  writeFileSync(path, lines.join("\n") + "\n");
  return ids;
}

interface Service {
  child: ChildProcess;
  baseUrl: string;
  logPath: string;
  stderr: string[];
}

async function startService(dir: string, name: string, nTasks: number, annotators: string): Promise<Service> {
  const manifest = join(dir, `${name}.jsonl`);
  writeManifest(manifest, nTasks);
  const logPath = join(dir, `${name}.log.jsonl`);
  const port = await freePort();
  const child = spawn(
    "python3",
    ["-m", "signemo.cli", "annotate-serve", "--manifest", manifest, "--log", logPath,
     "--annotators", annotators, "--host", "127.0.0.1", "--port", String(port),
     "--log-level", "ERROR"],
    { stdio: ["ignore", "ignore", "pipe"] },
  );
  const stderr: string[] = [];
  child.stderr!.on("data", (chunk: Buffer) => stderr.push(chunk.toString()));

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 40_000;
  for (;;) {
    try {
      const res = await fetch(`${baseUrl}/api/keymap`);
      if (res.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error(`service '${name}' did not come up:\n${stderr.join("")}`);
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  return { child, baseUrl, logPath, stderr };
}

function stopService(service: Service | undefined): void {
  if (service === undefined) return;
  service.child.kill("SIGTERM");
  setTimeout(() => service.child.kill("SIGKILL"), 3_000).unref();
}

/** Drive one session through every task, pressing plan[clip_id] each time. */
async function labelEverything(session: AnnotatorSession, plan: Map<string, string>): Promise<void> {
  await session.start();
  for (let guard = 0; guard < 100 && session.view.kind === "task"; guard++) {
    const clipId = session.view.task.clip_id;
    const key = plan.get(clipId);
    if (key === undefined) throw new Error(`no planned key for ${clipId}`);
    await session.handleKeypress(key);
  }
  expect(session.view.kind).toBe("done");
}

/** The same chance-corrected agreement the service reports, from first principles. */
function expectedAc1(keysA: string[], keysB: string[]): { p_o: number; ac1: number } {
  const n = keysA.length;
  const labels = Object.values(KEYMAP);
  const matches = keysA.filter((k, i) => k === keysB[i]).length;
  const p_o = matches / n;
  let p_e = 0;
  for (const label of labels) {
    const count =
      keysA.filter((k) => KEYMAP[k] === label).length +
      keysB.filter((k) => KEYMAP[k] === label).length;
    const pi = count / (2 * n);
    p_e += (pi * (1 - pi)) / (labels.length - 1);
  }
  return { p_o, ac1: (p_o - p_e) / (1 - p_e) };
}

let workDir: string;

beforeAll(() => {
  workDir = mkdtempSync(join(tmpdir(), "annotator-e2e-"));
});

afterAll(() => {
  rmSync(workDir, { recursive: true, force: true });
});

describe("two annotators against the live service", () => {
  let service: Service;
  let clipIds: string[];
  const keysA = ["j", "s", "a", "d", "f", "u", "n", "j", "s", "a"];
  const keysB = ["j", "s", "d", "d", "f", "u", "n", "f", "s", "a"]; // differs at c02 and c07

  beforeAll(async () => {
    service = await startService(workDir, "main", 10, "a1,a2");
    clipIds = Array.from({ length: 10 }, (_, i) => `c${String(i).padStart(2, "0")}`);
  });

  afterAll(() => stopService(service));

  it("serves exactly the fixed seven-key table", async () => {
    const served = await new ApiClient(service.baseUrl).keymap();
    expect(served).toEqual(KEYMAP);
  });

  it("completes both sessions and exports the agreed consensus subset", async () => {
    const client = new ApiClient(service.baseUrl);
    const planA = new Map(clipIds.map((id, i) => [id, keysA[i]!]));
    const planB = new Map(clipIds.map((id, i) => [id, keysB[i]!]));
    await labelEverything(new AnnotatorSession(client, "a1"), planA);
    await labelEverything(new AnnotatorSession(client, "a2"), planB);

    const exported = await client.export();
    expect(exported.total_tasks).toBe(10);
    expect(exported.annotators).toEqual(["a1", "a2"]);
    expect(exported.manifests.a1).toHaveLength(10);
    expect(exported.manifests.a2).toHaveLength(10);

    const agreedIds = clipIds.filter((_, i) => keysA[i] === keysB[i]);
    const consensus = exported.consensus!;
    expect(consensus.n).toBe(8);
    expect(consensus.records.map((r) => r.clip_id)).toEqual(agreedIds);
    expect(consensus.disagreement_ids).toEqual(["c02", "c07"]);
    expect(consensus.missing_ids).toEqual([]);
    for (const record of consensus.records) {
      const i = clipIds.indexOf(record.clip_id);
      const want = KEYMAP[keysA[i]!];
      expect(record.labels).toContainEqual({ label: want, source: "consensus" });
    }

    const wantCounts: Record<string, number> = {};
    for (const [i, id] of clipIds.entries()) {
      if (keysA[i] === keysB[i]) {
        const label = KEYMAP[keysA[i]!]!;
        wantCounts[label] = (wantCounts[label] ?? 0) + 1;
      }
    }
    const gotCounts = Object.fromEntries(
      Object.entries(consensus.per_class_counts).filter(([, v]) => v > 0),
    );
    expect(gotCounts).toEqual(wantCounts);

    const agreement = exported.agreement!;
    const want = expectedAc1(keysA, keysB);
    expect(agreement.n).toBe(10);
    expect(agreement.p_o).toBeCloseTo(want.p_o, 12);
    expect(agreement.ac1).toBeCloseTo(want.ac1, 12);
    expect(agreement.consensus_size).toBe(8);
  });

  it("matches the consensus computed by the evaluation library on the same labels", async () => {
    const exported = await new ApiClient(service.baseUrl).export();
    const script = [
      "import json, sys",
      "from signemo.corpus import load_manifest, LabelProvenance, LabelSource",
      "from signemo.labels import parse_label",
      "from signemo.evaluation import consensus_subset",
      "data = json.load(sys.stdin)",
      "records = []",
      "for rec in load_manifest(data['manifest']):",
      "    for annotator in ('a1', 'a2'):",
      "        value = data[annotator].get(rec.clip_id)",
      "        if value is not None:",
      "            prov = LabelProvenance(source=LabelSource.ANNOTATOR, annotator_id=annotator)",
      "            rec = rec.with_label(parse_label(value), prov)",
      "    records.append(rec)",
      "res = consensus_subset(records, 'a1', 'a2')",
      "print(json.dumps({",
      "    'ids': sorted(r.clip_id for r in res.records),",
      "    'per_class': {k.value: v for k, v in res.per_class_counts.items() if v},",
      "    'disagreements': sorted(res.disagreement_ids),",
      "}))",
    ].join("\n");
    const payload = {
      manifest: join(workDir, "main.jsonl"),
      a1: Object.fromEntries(clipIds.map((id, i) => [id, KEYMAP[keysA[i]!]])),
      a2: Object.fromEntries(clipIds.map((id, i) => [id, KEYMAP[keysB[i]!]])),
    };
    const run = spawnSync("python3", ["-c", script], {
      input: JSON.stringify(payload),
      encoding: "utf-8",
    });
    expect(run.status, run.stderr).toBe(0);
    const reference = JSON.parse(run.stdout) as {
      ids: string[];
      per_class: Record<string, number>;
      disagreements: string[];
    };

    const consensus = exported.consensus!;
    expect([...consensus.records.map((r) => r.clip_id)].sort()).toEqual(reference.ids);
    expect(consensus.disagreement_ids).toEqual(reference.disagreements);
    const gotCounts = Object.fromEntries(
      Object.entries(consensus.per_class_counts).filter(([, v]) => v > 0),
    );
    expect(gotCounts).toEqual(reference.per_class);
  });
});

describe("offline annotator against the live service", () => {
  let service: Service;

  beforeAll(async () => {
    service = await startService(workDir, "offline", 3, "b1");
  });

  afterAll(() => stopService(service));

  it("persists keypresses made during network loss exactly once after reconnect", async () => {
    const gate = { online: true };
    const gatedFetch: FetchLike = (input, init) => {
      if (!gate.online) throw new TypeError("network down");
      return fetch(input, init);
    };
    const session = new AnnotatorSession(new ApiClient(service.baseUrl, gatedFetch), "b1");
    await session.start();
    await session.handleKeypress("j"); // c00 while online

    gate.online = false;
    await session.handleKeypress("f"); // c01 attempt 0, queued
    await session.handleKeypress("s"); // c01 attempt 1: changed answer offline
    expect(session.pendingCount).toBe(2);

    gate.online = true;
    await session.reconnect();
    expect(session.pendingCount).toBe(0);
    await session.handleKeypress("n"); // c02, back to normal flow
    expect(session.view.kind).toBe("done");

    const logLines = readFileSync(service.logPath, "utf-8")
      .trim()
      .split("\n")
      .map((line) => JSON.parse(line) as Record<string, unknown>);
    const labels = logLines.filter((entry) => entry.type === "label");
    expect(labels.map((e) => [e.clip_id, e.attempt, e.key_pressed])).toEqual([
      ["c00", 0, "j"],
      ["c01", 0, "f"],
      ["c01", 1, "s"],
      ["c02", 0, "n"],
    ]);
    const tuples = labels.map((e) => `${e.annotator_id}|${e.clip_id}|${e.attempt}`);
    expect(new Set(tuples).size).toBe(tuples.length); // nothing lost, nothing doubled

    const exported = await new ApiClient(service.baseUrl).export();
    const byClip = Object.fromEntries(
      exported.manifests.b1!.map((rec) => [rec.clip_id, rec.labels[0]!.label]),
    );
    expect(byClip).toEqual({ c00: "joy", c01: "sadness", c02: "neutral" });
  });
});
