import { ApiClient } from "./api.js";
import { renderApp } from "./render.js";
import { AnnotatorSession } from "./session.js";

const IGNORED_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

function boot(): void {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app element");

  const params = new URLSearchParams(window.location.search);
  const annotatorId = params.get("annotator");
  if (annotatorId === null || annotatorId === "") {
    root.textContent = "missing ?annotator=<id> in the URL";
    return;
  }
  const endpoint = params.get("endpoint") ?? window.location.origin;

  const session = new AnnotatorSession(new ApiClient(endpoint), annotatorId);
  session.onChange((view) => renderApp(root, session, view));

  window.addEventListener("keydown", (event: KeyboardEvent) => {
    const target = event.target as HTMLElement | null;
    if (target && (IGNORED_TAGS.has(target.tagName) || target.isContentEditable)) return;
    if (event.metaKey || event.ctrlKey || event.altKey) return;
    void session.handleKeypress(event.key);
  });
  window.addEventListener("online", () => void session.reconnect());

  void session.start().catch((err: unknown) => {
    root.textContent = `could not start the session: ${err instanceof Error ? err.message : String(err)}`;
  });
}

boot();
