/** Browser bootstrap: wires the controller to the DOM and the keyboard.
 * Keys: 0-6 label, s skip, u undo. */
import { AnnotationApi } from "./api.js";
import { AnnotatorController } from "./controller.js";
import { renderProgress, renderRubric, renderView } from "./ui.js";
const RETRY_MS = 3000;
function el(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing element #${id}`);
    return node;
}
function boot() {
    const api = new AnnotationApi("");
    let controller = null;
    let retryTimer = null;
    const app = el("app");
    const taskCard = el("task-card");
    const doneScreen = el("done-screen");
    const banner = el("banner");
    const rubricList = el("rubric-list");
    const progressBars = el("progress-bars");
    function render(state) {
        banner.hidden = state.error === null && state.view.kind !== "down";
        if (state.error !== null) {
            banner.textContent = state.error;
            banner.classList.remove("info");
        }
        doneScreen.hidden = state.view.kind !== "exhausted";
        taskCard.hidden = state.view.kind === "exhausted";
        if (state.view.kind !== "exhausted") {
            taskCard.innerHTML = renderView(state.view);
        }
        if (state.view.kind === "down") {
            banner.hidden = false;
            banner.textContent = `Sin conexión con el servicio. Reintentando… (${state.view.message})`;
            if (retryTimer === null) {
                retryTimer = window.setTimeout(() => {
                    retryTimer = null;
                    controller?.start();
                }, RETRY_MS);
            }
        }
        const preselected = state.view.kind === "task" ? state.view.preselected : null;
        rubricList.innerHTML = renderRubric(state.schema, preselected);
        progressBars.innerHTML = renderProgress(state.progress, state.schema);
    }
    el("start").addEventListener("click", () => {
        const name = el("annotator").value.trim();
        if (!name)
            return;
        controller = new AnnotatorController(api, name, render);
        app.hidden = false;
        controller.start();
    });
    document.addEventListener("keydown", (event) => {
        if (!controller)
            return;
        const target = event.target;
        if (target && target.tagName === "INPUT")
            return;
        if (event.key >= "0" && event.key <= "6") {
            controller.submit(Number(event.key));
        }
        else if (event.key === "s") {
            controller.skip();
        }
        else if (event.key === "u") {
            controller.undo();
        }
    });
    rubricList.addEventListener("click", (event) => {
        const item = event.target.closest("li[data-code]");
        if (item && controller) {
            controller.submit(Number(item.dataset.code));
        }
    });
}
boot();
