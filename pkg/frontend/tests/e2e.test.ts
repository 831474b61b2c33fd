/** End-to-end flows against the real service: a scripted rater session
 * through the Eval view, and the author/progress round-trip. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { ApiClient } from "../src/api.js";
import { AuthorForm } from "../src/author.js";
import { renderEvalView } from "../src/eval.js";
import { ProgressPoller, renderProgressView } from "../src/progress.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const COVER_SPEC = readFileSync(
    join(REPO_ROOT, "src", "designsearch", "templates", "cover.html"), "utf-8");

let server: ChildProcess;
let storePath: string;
let base: string;
let api: ApiClient;

function freePort(): Promise<number> {
    return new Promise((resolvePort, reject) => {
        const probe = createServer();
        probe.once("error", reject);
        probe.listen(0, "127.0.0.1", () => {
            const address = probe.address();
            if (address === null || typeof address === "string") {
                reject(new Error("no port"));
                return;
            }
            probe.close(() => resolvePort(address.port));
        });
    });
}

async function until(check: () => boolean | Promise<boolean>,
                     timeoutMs = 20000, stepMs = 25): Promise<void> {
    const deadline = Date.now() + timeoutMs;
    while (Date.now() < deadline) {
        if (await check()) {
            return;
        }
        await new Promise((r) => setTimeout(r, stepMs));
    }
    throw new Error("condition not reached in time");
}

beforeAll(async () => {
    const port = await freePort();
    storePath = join(mkdtempSync(join(tmpdir(), "designsearch-")), "events.jsonl");
    server = spawn("python3", [
        "-m", "designsearch.cli", "serve",
        "--port", String(port), "--host", "127.0.0.1",
        "--store", storePath,
    ], { cwd: REPO_ROOT, stdio: "ignore" });
    base = `http://127.0.0.1:${port}`;
    api = new ApiClient(base);
    await until(async () => {
        try {
            const response = await fetch(`${base}/healthz`);
            return response.ok;
        } catch {
            return false;
        }
    }, 30000, 200);
});

afterAll(() => {
    server?.kill();
});

describe("eval view end to end", () => {
    it("completes the 5-comparison quota and the log shows exactly 5", async () => {
        const task = await api.createTask(COVER_SPEC, "cover run",
            { population_size: 50, iterations: 10, rng_seed: 7 },
            { worker_count: 50, per_worker_quota: 5 });

        const root = document.createElement("div");
        document.body.append(root);
        renderEvalView(root, api);
        const [taskInput, raterInput] = Array.from(
            root.querySelectorAll("input"));
        taskInput.value = task.task_id;
        raterInput.value = "crowd-1";
        root.querySelector("form")!.dispatchEvent(
            new Event("submit", { cancelable: true }));

        const doneText = () =>
            root.querySelector(".eval-status")?.textContent ?? "";
        const activeButton = () => root.querySelector(
            "button[data-side]:not([disabled])") as HTMLButtonElement | null;

        for (let step = 0; step < 12; step += 1) {
            await until(() => doneText().includes("no more comparisons")
                || activeButton() !== null);
            if (doneText().includes("no more comparisons")) {
                break;
            }
            const button = activeButton()!;
            button.click();
            await until(() => !root.contains(button)
                || doneText().includes("no more comparisons"));
        }
        expect(doneText()).toContain("no more comparisons");
        expect(doneText()).toContain("5 submitted");

        const events = readFileSync(storePath, "utf-8").trim().split("\n")
            .map((line) => JSON.parse(line));
        const choices = events.filter((e) => e.type === "choice"
            && e.task_id === task.task_id && e.rater_id === "crowd-1");
        expect(choices.length).toBe(5);
    });
});

describe("author and progress end to end", () => {
    it("launches the bundled cover spec at the $25 estimate and the "
        + "gallery updates after a full round", async () => {
        const form = new AuthorForm(api);
        expect(form.estimateLabel(50)).toBe("$25");

        const task = await form.launch({
            specHtml: COVER_SPEC, name: "cover", workers: 50, iterations: 10,
        });
        expect(task.cost_estimate).toBe(25);
        expect(task.state).toBe("running");

        const root = document.createElement("div");
        document.body.append(root);
        const viewPoller = renderProgressView(root, api, task.task_id, () => {});
        await until(() => (root.querySelector(".progress-heading")
            ?.textContent ?? "").includes("iterations: 0/10"));
        const galleryBefore = Array.from(root.querySelectorAll("iframe"))
            .map((frame) => frame.getAttribute("src"));
        expect(galleryBefore.length).toBe(8);

        // a harness-driven round: five raters spend their quotas
        const poller = new ProgressPoller(api, task.task_id, () => {});
        for (const rater of ["h1", "h2", "h3", "h4", "h5"]) {
            for (;;) {
                const assignment = await api.requestAssignment(
                    task.task_id, rater);
                if (assignment === "no-work"
                        || assignment === "quota-exhausted") {
                    break;
                }
                await api.submitChoice(assignment.assignment_id, rater,
                    Math.random() < 0.5 ? "left" : "right");
            }
        }
        const snapshot = await poller.refresh();
        expect(snapshot.generation).toBe(1);
        expect(snapshot.rated_total).toBe(25);

        root.querySelector("button")!.click();  // Refresh
        await until(() => (root.querySelector(".progress-heading")
            ?.textContent ?? "").includes("iterations: 1/10"));
        const galleryAfter = Array.from(root.querySelectorAll("iframe"))
            .map((frame) => frame.getAttribute("src"));
        expect(galleryAfter.length).toBe(8);
        expect(galleryAfter).not.toEqual(galleryBefore);
        viewPoller.stop();
    });
});
