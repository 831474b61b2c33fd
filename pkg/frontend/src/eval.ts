/** Rater flow: sign in, compare pairs side by side until the quota. */

import { ApiClient, Assignment } from "./api.js";
import { el } from "./format.js";

export type EvalState =
    | { kind: "idle" }
    | { kind: "loading" }
    | { kind: "showing"; assignment: Assignment }
    | { kind: "submitting"; assignment: Assignment }
    | { kind: "done"; reason: "quota" | "no-work" }
    | { kind: "error"; message: string };

const NO_WORK_RETRIES = 5;

/**
 * Drives one rater's session. The server owns all pairing and
 * presentation-order decisions; this class only walks the protocol:
 * fetch an assignment, submit exactly one choice for it, repeat.
 */
export class EvalSession {
    state: EvalState = { kind: "idle" };
    completed = 0;
    notice = "";

    constructor(
        private api: ApiClient,
        private taskId: string,
        private raterId: string,
        private onChange: (session: EvalSession) => void = () => {},
        private retryDelayMs = 500,
    ) {}

    private update(state: EvalState): void {
        this.state = state;
        this.onChange(this);
    }

    async start(): Promise<void> {
        await this.fetchNext();
    }

    private async fetchNext(): Promise<void> {
        this.update({ kind: "loading" });
        for (let attempt = 0; ; attempt += 1) {
            let result;
            try {
                result = await this.api.requestAssignment(this.taskId, this.raterId);
            } catch (err) {
                this.update({ kind: "error", message: String(err) });
                return;
            }
            if (result === "quota-exhausted") {
                this.update({ kind: "done", reason: "quota" });
                return;
            }
            if (result === "no-work") {
                if (attempt >= NO_WORK_RETRIES) {
                    this.update({ kind: "done", reason: "no-work" });
                    return;
                }
                await new Promise((resolve) =>
                    setTimeout(resolve, this.retryDelayMs));
                continue;
            }
            this.update({ kind: "showing", assignment: result });
            return;
        }
    }

    /** Submit the visible pair; re-entrant calls while a submission is in
     * flight are dropped (double-click guard). */
    async choose(side: "left" | "right"): Promise<void> {
        if (this.state.kind !== "showing") {
            return;
        }
        const assignment = this.state.assignment;
        this.update({ kind: "submitting", assignment });
        let outcome;
        try {
            outcome = await this.api.submitChoice(
                assignment.assignment_id, this.raterId, side);
        } catch (err) {
            this.update({ kind: "error", message: String(err) });
            return;
        }
        if (outcome === "recorded") {
            this.completed += 1;
            this.notice = "";
        } else if (outcome === "already-recorded") {
            this.notice = "already recorded";
        } else {
            this.notice = "assignment expired, fetching a fresh pair";
        }
        await this.fetchNext();
    }
}

export function renderEvalView(root: HTMLElement, api: ApiClient): void {
    root.replaceChildren();
    const form = el("form", { class: "eval-signin" });
    const taskInput = el("input", { placeholder: "task id", name: "task" });
    const raterInput = el("input", { placeholder: "worker id", name: "rater" });
    const go = el("button", { type: "submit" }, "Sign in");
    form.append(taskInput, raterInput, go);
    const stage = el("div", { class: "eval-stage" });
    root.append(form, stage);

    form.addEventListener("submit", (event) => {
        event.preventDefault();
        if (!taskInput.value || !raterInput.value) {
            return;
        }
        const session = new EvalSession(
            api, taskInput.value.trim(), raterInput.value.trim(),
            (s) => paintEval(stage, api, s));
        void session.start();
    });
}

function paintEval(stage: HTMLElement, api: ApiClient,
                   session: EvalSession): void {
    stage.replaceChildren();
    const status = el("p", { class: "eval-status" });
    stage.append(status);
    const state = session.state;
    if (state.kind === "loading") {
        status.textContent = "fetching a pair...";
        return;
    }
    if (state.kind === "error") {
        status.textContent = `error: ${state.message}`;
        return;
    }
    if (state.kind === "done") {
        status.textContent = state.reason === "quota"
            ? `no more comparisons; thank you! (${session.completed} submitted)`
            : "no work available right now";
        return;
    }
    if (state.kind !== "showing" && state.kind !== "submitting") {
        return;
    }
    status.textContent =
        "Please compare the following two web pages (scrollable), " +
        "and select the one that looks better and clearer to you.";
    if (session.notice) {
        stage.append(el("p", { class: "eval-notice" }, session.notice));
    }
    const assignment = state.assignment;
    const panes = el("div", { class: "eval-panes" });
    for (const side of ["left", "right"] as const) {
        const pane = el("div", { class: `pane pane-${side}` });
        const frame = el("iframe", {
            sandbox: "",
            src: side === "left" ? assignment.left_url : assignment.right_url,
            class: "design-frame",
        });
        const pick = el("button", { type: "button", "data-side": side },
                        "this web page looks better");
        pick.addEventListener("click", () => void session.choose(side));
        if (state.kind === "submitting") {
            pick.setAttribute("disabled", "disabled");
        }
        pane.append(frame, pick);
        panes.append(pane);
    }
    stage.append(panes);
}
