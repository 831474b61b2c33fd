/** Author view: spec editor, live cost estimate, preview and launch. */

import { ApiClient, SpecRejected, TaskView } from "./api.js";
import { el, estimateCost, formatCost } from "./format.js";

export interface LaunchFields {
    specHtml: string;
    name: string;
    workers: number;
    iterations: number;
}

export class AuthorForm {
    constructor(private api: ApiClient) {}

    estimateLabel(workers: number, unitPay = 0.5): string {
        return formatCost(estimateCost(workers, unitPay));
    }

    launch(fields: LaunchFields): Promise<TaskView> {
        return this.api.createTask(fields.specHtml, fields.name, {
            population_size: 50,
            iterations: fields.iterations,
        }, { worker_count: fields.workers });
    }
}

export function renderAuthorView(root: HTMLElement, api: ApiClient,
                                 onLaunched: (task: TaskView) => void,
                                 initialSpec = ""): void {
    const form = new AuthorForm(api);
    root.replaceChildren();

    const editor = el("textarea", {
        class: "spec-editor", rows: "18",
        placeholder: "paste an annotated HTML page here",
    });
    editor.value = initialSpec;
    const nameInput = el("input", { value: "my design", name: "name" });
    const workersInput = el("input", { type: "number", value: "50",
                                       name: "workers" });
    const iterationsInput = el("input", { type: "number", value: "10",
                                          name: "iterations" });
    const estimate = el("span", { class: "estimate" });
    const diagnostics = el("ul", { class: "diagnostics" });
    const previewButton = el("button", { type: "button" }, "Preview");
    const launchButton = el("button", { type: "button" }, "Launch");
    const previews = el("div", { class: "previews" });

    const refreshEstimate = () => {
        estimate.textContent =
            `estimated cost: ${form.estimateLabel(Number(workersInput.value))}`;
    };
    workersInput.addEventListener("input", refreshEstimate);
    refreshEstimate();

    const showDiagnostics = (items: { code: string; message: string }[]) => {
        diagnostics.replaceChildren(
            ...items.map((d) => el("li", {}, `${d.code}: ${d.message}`)));
    };

    previewButton.addEventListener("click", async () => {
        showDiagnostics([]);
        previews.replaceChildren();
        try {
            const designs = await api.preview(editor.value, 4);
            for (const design of designs) {
                const frame = el("iframe", { sandbox: "",
                                             class: "design-frame" });
                frame.setAttribute("srcdoc", design.html);
                previews.append(frame);
            }
        } catch (err) {
            if (err instanceof SpecRejected) {
                showDiagnostics(err.diagnostics);
            } else {
                showDiagnostics([{ code: "Error", message: String(err) }]);
            }
        }
    });

    launchButton.addEventListener("click", async () => {
        showDiagnostics([]);
        try {
            const task = await form.launch({
                specHtml: editor.value,
                name: nameInput.value,
                workers: Number(workersInput.value),
                iterations: Number(iterationsInput.value),
            });
            onLaunched(task);
        } catch (err) {
            if (err instanceof SpecRejected) {
                showDiagnostics(err.diagnostics);
            } else {
                showDiagnostics([{ code: "Error", message: String(err) }]);
            }
        }
    });

    const fields = el("div", { class: "author-fields" });
    fields.append(
        el("label", {}, "design name"), nameInput,
        el("label", {}, "workers"), workersInput,
        el("label", {}, "iterations"), iterationsInput,
        estimate, previewButton, launchButton);
    root.append(editor, fields, diagnostics, previews);
}
