import type { SessionView } from "./session.js";
import type { AnnotationTask, Keymap } from "./types.js";

/** What the renderer needs from a session; AnnotatorSession satisfies it. */
export interface AppSession {
  readonly annotatorId: string;
  keymap: Keymap;
  handleKeypress(key: string): Promise<void>;
}

/** Legend of the served key table, in served order. Never remapped locally. */
export function renderKeymapLegend(keymap: Keymap): HTMLElement {
  const list = document.createElement("ul");
  list.className = "keymap";
  for (const [key, label] of Object.entries(keymap)) {
    const item = document.createElement("li");
    item.dataset.key = key;
    const kbd = document.createElement("kbd");
    kbd.textContent = key;
    item.append(kbd, ` ${label}`);
    list.append(item);
  }
  return list;
}

/** One button per mapped key, for mouse users; same handler as the keyboard. */
export function renderKeyButtons(keymap: Keymap, onKey: (key: string) => void): HTMLElement {
  const bar = document.createElement("div");
  bar.className = "key-buttons";
  for (const [key, label] of Object.entries(keymap)) {
    const button = document.createElement("button");
    button.type = "button";
    button.dataset.key = key;
    button.textContent = `${label} (${key})`;
    button.addEventListener("click", () => onKey(key));
    bar.append(button);
  }
  return bar;
}

function renderVideo(url: string): HTMLElement {
  const holder = document.createElement("div");
  holder.className = "media";
  const video = document.createElement("video");
  video.src = url;
  video.controls = true;
  video.addEventListener("error", () => {
    // media failure must not block labeling: swap in a textual fallback
    const banner = document.createElement("div");
    banner.className = "media-fallback";
    banner.textContent = "video unavailable; label from the subtitle text";
    holder.replaceChildren(banner);
  });
  holder.append(video);
  return holder;
}

/** The sentence under annotation, highlighted, between its context lines. */
export function renderTask(task: AnnotationTask): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "task";
  panel.dataset.clipId = task.clip_id;

  if (task.video_url !== null) panel.append(renderVideo(task.video_url));

  const sentences = document.createElement("div");
  sentences.className = "sentences";
  for (const text of task.context_before) {
    const p = document.createElement("p");
    p.className = "context";
    p.textContent = text;
    sentences.append(p);
  }
  const target = document.createElement("p");
  target.className = "target";
  target.textContent = task.subtitle_text;
  sentences.append(target);
  for (const text of task.context_after) {
    const p = document.createElement("p");
    p.className = "context";
    p.textContent = text;
    sentences.append(p);
  }
  panel.append(sentences);
  return panel;
}

function renderStatus(view: SessionView): HTMLElement {
  const status = document.createElement("div");
  status.className = "status";
  if (view.kind === "loading") {
    status.textContent = "loading…";
    return status;
  }
  const progress = document.createElement("span");
  progress.className = "progress";
  progress.textContent = `${view.progress.done}/${view.progress.total} labeled`;
  status.append(progress);
  if (view.pending > 0) {
    const pending = document.createElement("span");
    pending.className = "pending";
    pending.textContent = ` · ${view.pending} awaiting sync`;
    status.append(pending);
  }
  if (view.kind === "task" && view.hint !== null) {
    const hint = document.createElement("span");
    hint.className = "hint";
    hint.textContent = ` · ${view.hint}`;
    status.append(hint);
  }
  return status;
}

/** Full-screen render of one session state into the root element. */
export function renderApp(root: HTMLElement, session: AppSession, view: SessionView): void {
  root.replaceChildren();

  const header = document.createElement("header");
  const who = document.createElement("span");
  who.className = "annotator";
  who.textContent = session.annotatorId;
  header.append(who, renderStatus(view));
  root.append(header);

  if (view.kind === "task") {
    root.append(renderTask(view.task));
    root.append(renderKeyButtons(session.keymap, (key) => void session.handleKeypress(key)));
  } else if (view.kind === "done") {
    const done = document.createElement("p");
    done.className = "done";
    done.textContent = "all tasks labeled — thank you";
    root.append(done);
  }

  // the legend stays visible in every state
  root.append(renderKeymapLegend(session.keymap));
}
