/** Hash router wiring the three views to one service. */

import { ApiClient } from "./api.js";
import { renderAuthorView } from "./author.js";
import { renderEvalView } from "./eval.js";
import { renderProgressView } from "./progress.js";

export function mount(root: HTMLElement, api = new ApiClient("")): void {
    let teardown: (() => void) | null = null;
    const route = () => {
        teardown?.();
        teardown = null;
        const hash = window.location.hash || "#/author";
        const [, view, arg] = hash.split("/");
        if (view === "eval") {
            renderEvalView(root, api);
        } else if (view === "progress" && arg) {
            const poller = renderProgressView(root, api, arg, (specHtml) => {
                window.location.hash = "#/author";
                renderAuthorView(root, api, onLaunched, specHtml);
            });
            teardown = () => poller.stop();
        } else {
            renderAuthorView(root, api, onLaunched);
        }
    };
    const onLaunched = (task: { task_id: string }) => {
        window.location.hash = `#/progress/${task.task_id}`;
    };
    window.addEventListener("hashchange", route);
    route();
}

const appRoot = typeof document !== "undefined"
    ? document.getElementById("app") : null;
if (appRoot) {
    mount(appRoot);
}
