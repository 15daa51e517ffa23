/** Typed client for the annotation service JSON API. */

export interface Task {
  comment_id: string;
  text: string;
  author: string;
  like_count: number;
  published_at: string;
  video_id: string;
  video_title: string;
  video_channel: string;
  lease_seconds: number;
}

export interface Progress {
  per_label: Record<string, number>;
  per_label_target: number;
  total: number;
  total_target: number;
}

export interface LabelInfo {
  code: number;
  name: string;
  rubric: string;
}

/** Server rejected the request (e.g. InvalidLabel, NotInSample). */
export class ApiRejection extends Error {
  constructor(
    public readonly kind: string,
    public readonly detail: string,
  ) {
    super(`${kind}: ${detail}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function rejectionFrom(resp: Response): Promise<ApiRejection> {
  let kind = `HTTP ${resp.status}`;
  let detail = "";
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") {
      kind = body.error;
      detail = typeof body.detail === "string" ? body.detail : "";
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiRejection(kind, detail);
}

export class AnnotationApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async schema(): Promise<LabelInfo[]> {
    const resp = await this.fetchFn(`${this.base}/api/schema`);
    if (!resp.ok) throw await rejectionFrom(resp);
    const body = await resp.json();
    return body.labels as LabelInfo[];
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchFn(`${this.base}/api/progress`);
    if (!resp.ok) throw await rejectionFrom(resp);
    return (await resp.json()) as Progress;
  }

  /** Next task for the annotator, or null when the sample is exhausted. */
  async next(annotator: string): Promise<Task | null> {
    const resp = await this.fetchFn(
      `${this.base}/api/next?annotator=${encodeURIComponent(annotator)}`,
    );
    if (resp.status === 204) return null;
    if (!resp.ok) throw await rejectionFrom(resp);
    return (await resp.json()) as Task;
  }

  /** Submit a label; code null retracts the annotator's record. */
  async label(commentId: string, code: number | null, annotator: string): Promise<Progress> {
    const resp = await this.fetchFn(`${this.base}/api/label`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ comment_id: commentId, code, annotator }),
    });
    if (!resp.ok) throw await rejectionFrom(resp);
    return (await resp.json()) as Progress;
  }

  async skip(commentId: string, annotator: string): Promise<void> {
    const resp = await this.fetchFn(`${this.base}/api/skip`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ comment_id: commentId, annotator }),
    });
    if (!resp.ok) throw await rejectionFrom(resp);
  }
}
