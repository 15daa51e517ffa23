/** HTML renderers for the annotation view. Pure string builders so they are
 * testable without a browser; main.ts assigns the output to innerHTML. */

import { LabelInfo, Progress, Task } from "./api.js";
import { View } from "./controller.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderRubric(schema: LabelInfo[], preselected: number | null): string {
  const items = schema
    .map((label) => {
      const selected = preselected === label.code ? ' class="selected" style="outline: 2px solid var(--ok)"' : "";
      return (
        `<li data-code="${label.code}"${selected}>` +
        `<span class="key">${label.code}</span>` +
        `<strong>${escapeHtml(label.name)}</strong> — ${escapeHtml(label.rubric)}</li>`
      );
    })
    .join("");
  return items;
}

export function renderProgress(progress: Progress | null, schema: LabelInfo[]): string {
  if (!progress) return "";
  return schema
    .map((label) => {
      const count = progress.per_label[String(label.code)] ?? 0;
      const target = progress.per_label_target;
      const pct = Math.min(100, target ? (count / target) * 100 : 0);
      const complete = count >= target ? " complete" : "";
      return (
        `<div class="bar-row" data-code="${label.code}">` +
        `<span>${escapeHtml(label.name)} ${count}/${target}</span>` +
        `<div class="bar-track"><div class="bar-fill${complete}" style="width: ${pct.toFixed(1)}%"></div></div>` +
        `</div>`
      );
    })
    .join("");
}

/** Comment text is shown verbatim (escaped, never trimmed or shortened). */
export function renderTask(task: Task): string {
  const meta = `${escapeHtml(task.video_title)} · ${escapeHtml(task.video_channel)}`;
  const details = `${escapeHtml(task.author)} · ${task.like_count} likes · ${escapeHtml(task.published_at)}`;
  return (
    `<div id="video-meta">${meta}</div>` +
    `<blockquote id="comment-text">${escapeHtml(task.text)}</blockquote>` +
    `<div id="comment-meta">${details}</div>`
  );
}

export function renderView(view: View): string {
  switch (view.kind) {
    case "idle":
      return "<p>Escribe tu nombre y pulsa Empezar.</p>";
    case "loading":
      return "<p>Cargando…</p>";
    case "task":
      return renderTask(view.task);
    case "exhausted":
      return "<h2>Muestra agotada</h2><p>No quedan comentarios por etiquetar.</p>";
    case "down":
      return `<p>Servicio no disponible: ${escapeHtml(view.message)}. Reintentando…</p>`;
  }
}
