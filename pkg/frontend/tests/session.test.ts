import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotatorSession } from "../src/session.js";
import { FakeService, makeTasks } from "./fake_service.js";

function setup(nTasks: number) {
  const service = new FakeService(makeTasks(nTasks));
  const session = new AnnotatorSession(new ApiClient("http://svc", service.fetch), "a1", {
    now: () => 1234.5,
  });
  return { service, session };
}

function currentClip(session: AnnotatorSession): string {
  expect(session.view.kind).toBe("task");
  return session.view.kind === "task" ? session.view.task.clip_id : "";
}

describe("annotator session", () => {
  it("starts at the first task with its context and progress", async () => {
    const { session } = setup(4);
    await session.start();
    expect(session.view.kind).toBe("task");
    if (session.view.kind !== "task") return;
    expect(session.view.task.clip_id).toBe("c00");
    expect(session.view.task.context_before).toEqual([]);
    expect(session.view.task.context_after).toEqual(["sentence number 1", "sentence number 2"]);
    expect(session.view.progress).toEqual({ done: 0, total: 4 });
  });

  it("submits a mapped key and advances to the next task", async () => {
    const { service, session } = setup(3);
    await session.start();
    await session.handleKeypress("j");
    expect(currentClip(session)).toBe("c01");
    expect(session.view.kind === "task" && session.view.progress.done).toBe(1);
    expect(service.labelLog()).toEqual([
      expect.objectContaining({ clip_id: "c00", label: "joy", key_pressed: "j", attempt: 0 }),
    ]);
  });

  it("walks every task to the done screen", async () => {
    const { service, session } = setup(3);
    await session.start();
    for (const key of ["j", "s", "n"]) await session.handleKeypress(key);
    expect(session.view.kind).toBe("done");
    expect(session.view.kind === "done" && session.view.progress).toEqual({ done: 3, total: 3 });
    expect(service.labelLog().map((e) => e.label)).toEqual(["joy", "sadness", "neutral"]);
  });

  it("never shows a task the server already has a label for", async () => {
    const { service, session } = setup(3);
    // previous session labeled c00 and c01
    service.events.set(
      "a1",
      new Map([
        ["c00", { label: "joy", key_pressed: "j", attempt: 0 }],
        ["c01", { label: "fear", key_pressed: "f", attempt: 0 }],
      ]),
    );
    await session.start();
    expect(currentClip(session)).toBe("c02");
    expect(session.view.kind === "task" && session.view.progress.done).toBe(2);
  });

  it("queues offline keypresses as relabel attempts and syncs each exactly once", async () => {
    const { service, session } = setup(3);
    await session.start();
    await session.handleKeypress("j"); // c00 online

    service.online = false;
    await session.handleKeypress("f"); // c01, attempt 0, queued
    expect(session.view.kind).toBe("task");
    if (session.view.kind === "task") {
      expect(session.view.pending).toBe(1);
      expect(session.view.hint).toContain("saved locally");
    }
    await session.handleKeypress("s"); // change of mind offline: attempt 1
    expect(session.pendingCount).toBe(2);
    expect(service.labelLog()).toHaveLength(1); // only the online c00 event so far

    service.online = true;
    await session.reconnect();
    const c01 = service.labelLog().filter((e) => e.clip_id === "c01");
    expect(c01.map((e) => [e.attempt, e.key_pressed])).toEqual([
      [0, "f"],
      [1, "s"],
    ]);
    expect(service.events.get("a1")!.get("c01")!.label).toBe("sadness"); // last write wins
    const tuples = service.labelLog().map((e) => `${e.clip_id}|${e.attempt}`);
    expect(new Set(tuples).size).toBe(tuples.length); // no duplicates
    expect(session.pendingCount).toBe(0);
    expect(currentClip(session)).toBe("c02");
  });

  it("blocks the eleventh unsynced keypress until the queue drains", async () => {
    const { service, session } = setup(2);
    await session.start();
    service.online = false;
    const keys = ["j", "s", "a", "d", "f", "u", "n", "j", "s", "a"];
    for (const key of keys) await session.handleKeypress(key); // 10 attempts on c00
    expect(session.blocked).toBe(true);

    await session.handleKeypress("n"); // refused, nothing queued
    expect(session.pendingCount).toBe(10);
    expect(session.view.kind === "task" && session.view.hint).toContain("sync queue is full");
    expect(service.labelLog()).toHaveLength(0);

    service.online = true;
    await session.reconnect();
    expect(service.labelLog()).toHaveLength(10);
    expect(service.events.get("a1")!.get("c00")!.label).toBe("anger"); // the last key
    expect(session.blocked).toBe(false);
    expect(currentClip(session)).toBe("c01");
  });

  it("shows the server's reason when a submission is rejected and reconciles", async () => {
    const { service, session } = setup(2);
    await session.start();
    service.rejectNextSubmit = "somebody else relabeled this clip";
    await session.handleKeypress("j");
    expect(session.view.kind).toBe("task");
    expect(currentClip(session)).toBe("c00"); // refreshed, still the first unlabeled
    await session.handleKeypress("j"); // works after reconciliation
    expect(currentClip(session)).toBe("c01");
  });

  it("ignores keypresses on the done screen", async () => {
    const { service, session } = setup(1);
    await session.start();
    await session.handleKeypress("j");
    expect(session.view.kind).toBe("done");
    await session.handleKeypress("s");
    expect(service.labelLog()).toHaveLength(1);
  });
});
