/** Annotation session state machine, independent of the DOM.
 *
 * One submission in flight at a time; the view advances optimistically on
 * submit and rolls back with the server's error verbatim on rejection.
 * Undo retracts the last label on the server and reloads that comment with
 * the previous label preselected.
 */

import { AnnotationApi, ApiRejection, LabelInfo, Progress, Task } from "./api.js";

export type View =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "task"; task: Task; preselected: number | null }
  | { kind: "exhausted" }
  | { kind: "down"; message: string };

export interface ControllerState {
  view: View;
  schema: LabelInfo[];
  progress: Progress | null;
  error: string | null; // transient banner text
}

interface HistoryEntry {
  task: Task;
  code: number;
}

export class AnnotatorController {
  private state: ControllerState = {
    view: { kind: "idle" },
    schema: [],
    progress: null,
    error: null,
  };
  private history: HistoryEntry[] = [];
  private inFlight = false;

  constructor(
    private readonly api: AnnotationApi,
    readonly annotator: string,
    private readonly onChange: (state: ControllerState) => void = () => {},
  ) {}

  snapshot(): ControllerState {
    return this.state;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private emit(partial: Partial<ControllerState>): void {
    this.state = { ...this.state, ...partial };
    this.onChange(this.state);
  }

  /** Fetch schema, progress, and the first task. The label list is always
   * served by the service; nothing is hard-coded client-side. */
  async start(): Promise<void> {
    this.emit({ view: { kind: "loading" }, error: null });
    try {
      const [schema, progress] = await Promise.all([this.api.schema(), this.api.progress()]);
      this.emit({ schema, progress });
      await this.loadNext();
    } catch (err) {
      this.emit({ view: { kind: "down", message: describe(err) } });
    }
  }

  private async loadNext(preselected: number | null = null): Promise<void> {
    try {
      const task = await this.api.next(this.annotator);
      if (task === null) {
        this.emit({ view: { kind: "exhausted" } });
      } else {
        this.emit({ view: { kind: "task", task, preselected } });
      }
    } catch (err) {
      this.emit({ view: { kind: "down", message: describe(err) } });
    }
  }

  /** Submit a label for the rendered task. Returns false when suppressed
   * (no task on screen, or another submission is in flight). */
  async submit(code: number): Promise<boolean> {
    const view = this.state.view;
    if (this.inFlight || view.kind !== "task") return false;
    const task = view.task;
    this.inFlight = true;
    // optimistic advance: the card clears before the server confirms
    this.emit({ view: { kind: "loading" }, error: null });
    try {
      const progress = await this.api.label(task.comment_id, code, this.annotator);
      this.history.push({ task, code });
      this.emit({ progress });
      await this.loadNext();
      return true;
    } catch (err) {
      if (err instanceof ApiRejection) {
        // roll back to the same task with the rejection surfaced verbatim
        this.emit({ view: { kind: "task", task, preselected: null }, error: err.message });
      } else {
        this.emit({ view: { kind: "down", message: describe(err) } });
      }
      return false;
    } finally {
      this.inFlight = false;
    }
  }

  /** Push the rendered task to the back of this annotator's queue. */
  async skip(): Promise<boolean> {
    const view = this.state.view;
    if (this.inFlight || view.kind !== "task") return false;
    this.inFlight = true;
    this.emit({ view: { kind: "loading" }, error: null });
    try {
      await this.api.skip(view.task.comment_id, this.annotator);
      await this.loadNext();
      return true;
    } catch (err) {
      this.emit({ view: { kind: "task", task: view.task, preselected: null }, error: describe(err) });
      return false;
    } finally {
      this.inFlight = false;
    }
  }

  /** Retract the most recent label and reload that comment with the
   * previous label preselected; the server count is restored. */
  async undo(): Promise<boolean> {
    if (this.inFlight || this.history.length === 0) return false;
    const entry = this.history[this.history.length - 1];
    this.inFlight = true;
    this.emit({ view: { kind: "loading" }, error: null });
    try {
      const progress = await this.api.label(entry.task.comment_id, null, this.annotator);
      this.history.pop();
      this.emit({
        progress,
        view: { kind: "task", task: entry.task, preselected: entry.code },
      });
      return true;
    } catch (err) {
      this.emit({ error: describe(err) });
      await this.loadNext();
      return false;
    } finally {
      this.inFlight = false;
    }
  }

  async refreshProgress(): Promise<void> {
    try {
      this.emit({ progress: await this.api.progress() });
    } catch {
      // banner already covers a down service; progress refresh is best-effort
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof Error) return err.message;
  return String(err);
}
