import type {
  ExportResult,
  Keymap,
  LabelEvent,
  NextTask,
  SessionStart,
  SubmitResult,
} from "./types.js";

/** Transport failure: the request never produced an HTTP response. Retryable. */
export class NetworkError extends Error {}

/** The server answered with an error status. Not retryable as-is. */
export class ServerRejection extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly extra: Record<string, unknown> = {},
  ) {
    super(detail);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new NetworkError(err instanceof Error ? err.message : String(err));
    }
    if (!res.ok) {
      let detail = `HTTP ${res.status}`;
      let extra: Record<string, unknown> = {};
      try {
        const body = (await res.json()) as Record<string, unknown>;
        if (typeof body.detail === "string") detail = body.detail;
        extra = body;
      } catch {
        // non-JSON error body; keep the status line
      }
      throw new ServerRejection(res.status, detail, extra);
    }
    return (await res.json()) as T;
  }

  keymap(): Promise<Keymap> {
    return this.request<Keymap>("/api/keymap");
  }

  register(annotatorId: string): Promise<SessionStart> {
    return this.request<SessionStart>(`/api/session/${encodeURIComponent(annotatorId)}`, {
      method: "POST",
    });
  }

  nextTask(annotatorId: string): Promise<NextTask> {
    return this.request<NextTask>(`/api/session/${encodeURIComponent(annotatorId)}/next`);
  }

  submitLabel(event: LabelEvent): Promise<SubmitResult> {
    return this.request<SubmitResult>("/api/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(event),
    });
  }

  export(opts: { annotators?: string[]; partial?: boolean } = {}): Promise<ExportResult> {
    const params = new URLSearchParams();
    if (opts.annotators && opts.annotators.length > 0) {
      params.set("annotators", opts.annotators.join(","));
    }
    if (opts.partial) params.set("partial", "true");
    const query = params.toString();
    return this.request<ExportResult>(`/api/export${query ? `?${query}` : ""}`);
  }
}
