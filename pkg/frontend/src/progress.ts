/** Progress view: heading, refresh/edit/export, current-generation gallery. */

import { ApiClient, ProgressView } from "./api.js";
import { el } from "./format.js";

const GALLERY_LIMIT = 8;

export class ProgressPoller {
    latest: ProgressView | null = null;
    private timer: ReturnType<typeof setInterval> | null = null;
    private stopped = false;

    constructor(
        private api: ApiClient,
        private taskId: string,
        private onUpdate: (snapshot: ProgressView) => void,
        private intervalMs = 2000,
    ) {}

    async refresh(): Promise<ProgressView> {
        const snapshot = await this.api.progress(this.taskId);
        this.latest = snapshot;
        if (!this.stopped) {
            this.onUpdate(snapshot);
        }
        if (snapshot.state === "completed") {
            this.stop();
        }
        return snapshot;
    }

    start(): void {
        this.stopped = false;
        if (this.timer === null) {
            this.timer = setInterval(() => void this.refresh(), this.intervalMs);
        }
    }

    stop(): void {
        this.stopped = true;
        if (this.timer !== null) {
            clearInterval(this.timer);
            this.timer = null;
        }
    }
}

export function renderProgressView(root: HTMLElement, api: ApiClient,
                                   taskId: string,
                                   onEdit: (specHtml: string) => void,
                                   ): ProgressPoller {
    root.replaceChildren();
    const heading = el("h2", { class: "progress-heading" });
    const refreshButton = el("button", { type: "button" }, "Refresh");
    const editButton = el("button", { type: "button", disabled: "disabled" },
                          "Edit");
    const exportLink = el("a", { class: "export-link hidden" }, "Export");
    const gallery = el("div", { class: "gallery" });
    root.append(heading, refreshButton, editButton, exportLink, gallery);

    const paint = (snapshot: ProgressView) => {
        if (!root.isConnected) {
            poller.stop();
            return;
        }
        heading.textContent =
            `Design name: ${snapshot.name}, iterations: ${snapshot.generation}` +
            `/${snapshot.iterations}, worker: ${snapshot.workers}`;
        const urls = (snapshot.top_urls ?? snapshot.design_urls)
            .slice(0, GALLERY_LIMIT);
        gallery.replaceChildren(...urls.map((url) => el("iframe", {
            sandbox: "", src: url, class: "design-frame",
        })));
        if (snapshot.state === "completed") {
            refreshButton.setAttribute("disabled", "disabled");
            editButton.removeAttribute("disabled");
            exportLink.setAttribute("href", api.exportUrl(taskId, 5));
            exportLink.classList.remove("hidden");
        }
    };

    const poller: ProgressPoller = new ProgressPoller(api, taskId, paint);
    refreshButton.addEventListener("click", () => void poller.refresh());
    editButton.addEventListener("click", async () => {
        const task = await api.getTask(taskId);
        onEdit(task.spec_html);
    });
    void poller.refresh();
    poller.start();
    return poller;
}
