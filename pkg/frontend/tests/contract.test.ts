// UI contract against a live annotation service: the compiled controller
// drives the real HTTP API end to end (21 labels, 3 per category, undo).
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { AnnotationApi } from "../../src/polemos/static/js/api.js";
import { AnnotatorController } from "../../src/polemos/static/js/controller.js";

const PORT = 8190 + (process.pid % 300);
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let service: ChildProcess;

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const resp = await fetch(`${BASE}/api/schema`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("annotation service never came up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "polemos-ui-"));
  execFileSync("python3", [join(__dirname, "fixtures", "bootstrap_service.py"), workdir, "21", "3"]);
  service = spawn(
    "python3",
    ["-m", "polemos.cli", "annotate-serve", "--config", join(workdir, "polemos.json"), "--port", String(PORT)],
    { cwd: workdir, stdio: "ignore" },
  );
  await waitForService();
});

afterAll(() => {
  service?.kill("SIGINT");
  rmSync(workdir, { recursive: true, force: true });
});

describe("annotator UI against the live service", () => {
  it("completes 21 labels (3 per category), undo restores the count", async () => {
    const api = new AnnotationApi(BASE);
    const controller = new AnnotatorController(api as any, "vera");
    await controller.start();

    // schema comes from the service, all seven codes with rubric text
    const schema = controller.snapshot().schema;
    expect(schema.map((l: any) => l.code)).toEqual([0, 1, 2, 3, 4, 5, 6]);
    for (const label of schema) expect(label.rubric.length).toBeGreaterThan(0);

    // label 21 comments, three per category, driven through the controller
    let lastCode = -1;
    for (let i = 0; i < 21; i++) {
      const view = controller.snapshot().view;
      expect(view.kind).toBe("task");
      lastCode = i % 7;
      const ok = await controller.submit(lastCode);
      expect(ok).toBe(true);
    }
    expect(controller.snapshot().view.kind).toBe("exhausted");

    // the progress endpoint reports exactly 3 per label
    const progress = await api.progress();
    for (let code = 0; code < 7; code++) {
      expect(progress.per_label[String(code)]).toBe(3);
    }
    expect(progress.total).toBe(21);

    // every bar is at target, which the UI marks complete
    const state = controller.snapshot();
    expect(state.progress.per_label_target).toBe(3);

    // undo: the last label is retracted server-side and the comment comes
    // back with the previous label preselected
    const undone = await controller.undo();
    expect(undone).toBe(true);
    const afterUndo = await api.progress();
    expect(afterUndo.per_label[String(lastCode)]).toBe(2);
    expect(afterUndo.total).toBe(20);
    const view = controller.snapshot().view;
    expect(view.kind).toBe("task");
    if (view.kind === "task") {
      expect(view.preselected).toBe(lastCode);
    }

    // re-submitting the same label restores the full quota
    const resubmit = await controller.submit(lastCode);
    expect(resubmit).toBe(true);
    const restored = await api.progress();
    expect(restored.per_label[String(lastCode)]).toBe(3);
    expect(controller.snapshot().view.kind).toBe("exhausted");
  });

  it("rejects an out-of-schema label and the controller rolls back", async () => {
    const api = new AnnotationApi(BASE);
    const controller = new AnnotatorController(api as any, "otro");
    await controller.start();
    const before = controller.snapshot().view;
    expect(before.kind).toBe("task");
    const ok = await controller.submit(9 as any);
    expect(ok).toBe(false);
    const state = controller.snapshot();
    expect(state.error).toContain("InvalidLabel");
    expect(state.view).toMatchObject(before);
  });
});
