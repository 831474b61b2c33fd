/** Typed client for the scheduling service endpoints. */

export interface TaskConfig {
    population_size: number;
    iterations: number;
    mutation_rate?: number;
    rng_seed?: number;
}

export interface BudgetSpec {
    worker_count: number;
    per_worker_quota?: number;
    unit_pay?: number;
}

export interface TaskView {
    task_id: string;
    name: string;
    state: string;
    current_generation: number;
    iterations: number;
    population_size: number;
    cost_estimate: number;
    space_size: number;
    spec_html: string;
    budget: { worker_count: number; per_worker_quota: number; unit_pay: number };
}

export interface ProgressView {
    task_id: string;
    name: string;
    state: string;
    generation: number;
    iterations: number;
    workers: number;
    pairs_total: number;
    rated: number;
    rated_total: number;
    leased: number;
    pending: number;
    designs: number[];
    design_urls: string[];
    top?: number[];
    top_urls?: string[];
}

export interface Assignment {
    assignment_id: string;
    task_id: string;
    generation: number;
    left_url: string;
    right_url: string;
    expires_at: number;
}

export interface PreviewDesign {
    sequence: number[];
    html: string;
}

export interface Diagnostic {
    code: string;
    element_id: string | null;
    message: string;
}

export type AssignmentResult = Assignment | "no-work" | "quota-exhausted";
export type ChoiceResult = "recorded" | "already-recorded" | "lease-expired";

export class SpecRejected extends Error {
    constructor(public diagnostics: Diagnostic[]) {
        super(diagnostics.map((d) => d.message).join("; "));
    }
}

async function errorMessage(response: Response): Promise<string> {
    try {
        const body = await response.json();
        return body.message ?? response.statusText;
    } catch {
        return response.statusText;
    }
}

export class ApiClient {
    constructor(
        private base: string = "",
        private fetchImpl: typeof fetch = fetch,
    ) {}

    private url(path: string): string {
        return `${this.base}${path}`;
    }

    private async getJson<T>(path: string): Promise<T> {
        const response = await this.fetchImpl(this.url(path));
        if (!response.ok) {
            throw new Error(await errorMessage(response));
        }
        return response.json() as Promise<T>;
    }

    async createTask(specHtml: string, name: string, config: TaskConfig,
                     budget: BudgetSpec): Promise<TaskView> {
        const response = await this.fetchImpl(this.url("/tasks"), {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({
                spec_html: specHtml, name, config, budget,
            }),
        });
        if (response.status === 400) {
            const body = await response.json();
            throw new SpecRejected(body.diagnostics ?? []);
        }
        if (!response.ok) {
            throw new Error(await errorMessage(response));
        }
        return response.json() as Promise<TaskView>;
    }

    getTask(taskId: string): Promise<TaskView> {
        return this.getJson(`/tasks/${taskId}`);
    }

    progress(taskId: string): Promise<ProgressView> {
        return this.getJson(`/tasks/${taskId}/progress`);
    }

    async preview(specHtml: string, sample = 4, seed = 0):
            Promise<PreviewDesign[]> {
        const response = await this.fetchImpl(this.url("/preview"), {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify({ spec_html: specHtml, sample, seed }),
        });
        if (response.status === 400) {
            const body = await response.json();
            throw new SpecRejected(body.diagnostics ?? []);
        }
        if (!response.ok) {
            throw new Error(await errorMessage(response));
        }
        const body = await response.json();
        return body.designs as PreviewDesign[];
    }

    async requestAssignment(taskId: string, raterId: string):
            Promise<AssignmentResult> {
        const path = `/tasks/${taskId}/assignments?rater=${encodeURIComponent(raterId)}`;
        const response = await this.fetchImpl(this.url(path), { method: "POST" });
        if (response.status === 204) {
            return "no-work";
        }
        if (response.status === 429) {
            return "quota-exhausted";
        }
        if (!response.ok) {
            throw new Error(await errorMessage(response));
        }
        return response.json() as Promise<Assignment>;
    }

    async submitChoice(assignmentId: string, raterId: string,
                       side: "left" | "right"): Promise<ChoiceResult> {
        const response = await this.fetchImpl(
            this.url(`/assignments/${assignmentId}/choice`), {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify({ rater_id: raterId, winner_side: side }),
            });
        if (response.status === 409) {
            return "already-recorded";
        }
        if (response.status === 410) {
            return "lease-expired";
        }
        if (!response.ok) {
            throw new Error(await errorMessage(response));
        }
        return "recorded";
    }

    designUrl(taskId: string, individualId: number): string {
        return this.url(`/tasks/${taskId}/designs/${individualId}`);
    }

    exportUrl(taskId: string, k = 5): string {
        return this.url(`/tasks/${taskId}/export?k=${k}`);
    }
}
