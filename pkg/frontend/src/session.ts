import { ApiClient, NetworkError, ServerRejection } from "./api.js";
import { OfflineQueue } from "./queue.js";
import type { AnnotationTask, Keymap, LabelEvent, Progress } from "./types.js";

export type SessionView =
  | { kind: "loading" }
  | { kind: "task"; task: AnnotationTask; progress: Progress; pending: number; hint: string | null }
  | { kind: "done"; progress: Progress; pending: number };

type Listener = (view: SessionView) => void;

/**
 * One annotator's labeling flow, DOM-free.
 *
 * The server hands out tasks one at a time and skips anything this annotator
 * already labeled, so the UI can never show an already-labeled task. While
 * the network is down, keypresses on the visible task queue locally (each as
 * a fresh attempt, so changing your answer offline is a relabel, not a
 * duplicate) and the flow resumes on reconnect().
 */
export class AnnotatorSession {
  keymap: Keymap = {};

  private readonly queue: OfflineQueue;
  private token: string | undefined;
  private readonly attempts = new Map<string, number>();
  private currentView: SessionView = { kind: "loading" };
  private progress: Progress = { done: 0, total: 0 };
  private readonly listeners: Listener[] = [];
  private readonly now: () => number;

  constructor(
    private readonly client: ApiClient,
    readonly annotatorId: string,
    opts: { now?: () => number } = {},
  ) {
    this.queue = new OfflineQueue((event) => client.submitLabel(event));
    this.now = opts.now ?? (() => Date.now() / 1000);
  }

  get view(): SessionView {
    return this.currentView;
  }

  get pendingCount(): number {
    return this.queue.size;
  }

  get blocked(): boolean {
    return this.queue.blocked;
  }

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.currentView);
  }

  private show(view: SessionView): void {
    this.currentView = view;
    this.notify();
  }

  async start(): Promise<void> {
    this.keymap = await this.client.keymap();
    const session = await this.client.register(this.annotatorId);
    this.token = session.token;
    this.progress = session.progress;
    await this.refresh();
  }

  /** Pull the next unlabeled task from the server (also used to reconcile). */
  async refresh(): Promise<void> {
    let next;
    try {
      next = await this.client.nextTask(this.annotatorId);
    } catch (err) {
      if (err instanceof NetworkError) return; // keep the current screen
      throw err;
    }
    this.progress = next.progress;
    if (next.done || next.task === null) {
      this.show({ kind: "done", progress: next.progress, pending: this.queue.size });
    } else {
      this.show({
        kind: "task",
        task: next.task,
        progress: next.progress,
        pending: this.queue.size,
        hint: null,
      });
    }
  }

  async handleKeypress(key: string): Promise<void> {
    const view = this.currentView;
    if (view.kind !== "task") return;

    const label = this.keymap[key];
    if (label === undefined) {
      this.show({ ...view, hint: `key '${key}' is not mapped` });
      return;
    }
    if (this.queue.blocked) {
      this.show({ ...view, pending: this.queue.size, hint: "sync queue is full; waiting for the connection" });
      return;
    }

    const clipId = view.task.clip_id;
    const attempt = this.attempts.get(clipId) ?? 0;
    this.attempts.set(clipId, attempt + 1);
    const event: LabelEvent = {
      clip_id: clipId,
      annotator_id: this.annotatorId,
      key_pressed: key,
      label,
      timestamp: this.now(),
      attempt,
      token: this.token,
    };

    const outcome = await this.queue.submit(event);
    switch (outcome.kind) {
      case "sent":
        this.progress = outcome.result.progress;
        await this.refresh();
        break;
      case "queued":
        // Stay on the task: the label is saved locally and another keypress
        // is a relabel (next attempt). The next task needs the server.
        this.show({
          ...view,
          pending: this.queue.size,
          hint: `'${label}' saved locally; will sync when the connection returns`,
        });
        break;
      case "rejected":
        this.show({ ...view, pending: this.queue.size, hint: outcome.error.detail });
        await this.refresh();
        break;
      case "blocked":
        this.show({ ...view, pending: this.queue.size, hint: "sync queue is full; waiting for the connection" });
        break;
      case "duplicate":
        break;
    }
  }

  /** Flush queued events, then resume at the server's next task. */
  async reconnect(): Promise<void> {
    const { rejections } = await this.queue.flush();
    if (this.queue.size > 0) return; // still offline
    await this.refresh();
    if (rejections.length > 0 && this.currentView.kind === "task") {
      this.show({ ...this.currentView, hint: rejections[0]!.detail });
    }
  }
}

export { NetworkError, ServerRejection };
