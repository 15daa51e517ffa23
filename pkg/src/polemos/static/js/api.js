/** Typed client for the annotation service JSON API. */
/** Server rejected the request (e.g. InvalidLabel, NotInSample). */
export class ApiRejection extends Error {
    constructor(kind, detail) {
        super(`${kind}: ${detail}`);
        this.kind = kind;
        this.detail = detail;
    }
}
async function rejectionFrom(resp) {
    let kind = `HTTP ${resp.status}`;
    let detail = "";
    try {
        const body = await resp.json();
        if (body && typeof body.error === "string") {
            kind = body.error;
            detail = typeof body.detail === "string" ? body.detail : "";
        }
    }
    catch {
        // non-JSON error body; keep the status line
    }
    return new ApiRejection(kind, detail);
}
export class AnnotationApi {
    constructor(base = "", fetchFn = (input, init) => fetch(input, init)) {
        this.base = base;
        this.fetchFn = fetchFn;
    }
    async schema() {
        const resp = await this.fetchFn(`${this.base}/api/schema`);
        if (!resp.ok)
            throw await rejectionFrom(resp);
        const body = await resp.json();
        return body.labels;
    }
    async progress() {
        const resp = await this.fetchFn(`${this.base}/api/progress`);
        if (!resp.ok)
            throw await rejectionFrom(resp);
        return (await resp.json());
    }
    /** Next task for the annotator, or null when the sample is exhausted. */
    async next(annotator) {
        const resp = await this.fetchFn(`${this.base}/api/next?annotator=${encodeURIComponent(annotator)}`);
        if (resp.status === 204)
            return null;
        if (!resp.ok)
            throw await rejectionFrom(resp);
        return (await resp.json());
    }
    /** Submit a label; code null retracts the annotator's record. */
    async label(commentId, code, annotator) {
        const resp = await this.fetchFn(`${this.base}/api/label`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ comment_id: commentId, code, annotator }),
        });
        if (!resp.ok)
            throw await rejectionFrom(resp);
        return (await resp.json());
    }
    async skip(commentId, annotator) {
        const resp = await this.fetchFn(`${this.base}/api/skip`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ comment_id: commentId, annotator }),
        });
        if (!resp.ok)
            throw await rejectionFrom(resp);
    }
}
