"""HTTP/JSON surface over the task service.

Paths are a stable contract for the web UI: tasks, progress, rendered
designs, assignment leasing, choice submission and export. Everything
authoritative lives in the service; handlers only translate errors to
status codes.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import GAConfig
from .scheduler import (
    AlreadySubmitted,
    Budget,
    LeaseExpired,
    NotLeaseHolder,
    NotReady,
    QuotaExhausted,
    TaskRejected,
    TaskService,
    UnknownAssignment,
    UnknownDesign,
    UnknownTask,
)

_STATUS = {
    UnknownTask: 404,
    UnknownAssignment: 404,
    UnknownDesign: 404,
    TaskRejected: 400,
    QuotaExhausted: 429,
    AlreadySubmitted: 409,
    LeaseExpired: 410,
    NotLeaseHolder: 403,
    NotReady: 409,
}


class TaskConfigBody(BaseModel):
    population_size: int = 50
    iterations: int = 10
    mutation_rate: float = 0.03
    rng_seed: int = 0


class BudgetBody(BaseModel):
    worker_count: int = 50
    per_worker_quota: int = 5
    unit_pay: float = 0.5


class CreateTaskBody(BaseModel):
    spec_html: str
    name: str = "task"
    config: TaskConfigBody = TaskConfigBody()
    budget: BudgetBody = BudgetBody()


class ChoiceBody(BaseModel):
    rater_id: str
    winner_side: str


class PreviewBody(BaseModel):
    spec_html: str
    sample: int = 4
    seed: int = 0


def create_app(service: TaskService, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="designsearch")
    # The UI may be served from another origin during development.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    def fail(err: Exception) -> JSONResponse:
        status = _STATUS.get(type(err), 500)
        body = {"error": type(err).__name__, "message": str(err)}
        if isinstance(err, TaskRejected):
            body["diagnostics"] = err.diagnostics
        return JSONResponse(status_code=status, content=body)

    for exc_type in _STATUS:
        app.add_exception_handler(exc_type, lambda request, err: fail(err))
    app.add_exception_handler(ValueError, lambda request, err: JSONResponse(
        status_code=422, content={"error": "ValueError", "message": str(err)}))

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/tasks", status_code=201)
    def create_task(body: CreateTaskBody) -> dict:
        return service.create_task(
            body.spec_html,
            config=GAConfig(**body.config.model_dump()),
            budget=Budget(**body.budget.model_dump()),
            name=body.name)

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str) -> dict:
        return service.task_view(task_id)

    @app.get("/tasks/{task_id}/progress")
    def progress(task_id: str) -> dict:
        snapshot = service.progress(task_id)
        base = f"/tasks/{task_id}/designs"
        snapshot["design_urls"] = [f"{base}/{i}" for i in snapshot["designs"]]
        if "top" in snapshot:
            snapshot["top_urls"] = [f"{base}/{i}" for i in snapshot["top"]]
        return snapshot

    @app.get("/tasks/{task_id}/designs/{individual_id}")
    def design(task_id: str, individual_id: int) -> HTMLResponse:
        return HTMLResponse(service.design_html(task_id, individual_id))

    @app.get("/tasks/{task_id}/log")
    def generation_log(task_id: str) -> Response:
        return Response(content=service.generation_log(task_id),
                        media_type="application/x-ndjson")

    @app.post("/tasks/{task_id}/assignments")
    def request_assignment(task_id: str, rater: str):
        assignment = service.request_assignment(task_id, rater)
        if assignment is None:
            return Response(status_code=204)
        base = f"/tasks/{task_id}/designs"
        assignment["left_url"] = f"{base}/{assignment['left']}"
        assignment["right_url"] = f"{base}/{assignment['right']}"
        return assignment

    @app.post("/assignments/{assignment_id}/choice")
    def submit_choice(assignment_id: str, body: ChoiceBody) -> dict:
        return service.submit_choice(assignment_id, body.rater_id,
                                     body.winner_side)

    @app.get("/tasks/{task_id}/export")
    def export(task_id: str, k: int = 5) -> Response:
        manifest, files = service.export(task_id, k)
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
            archive.writestr("manifest.json", json.dumps(manifest, indent=2))
            for name, html in files.items():
                archive.writestr(name, html)
        headers = {"Content-Disposition":
                   f'attachment; filename="{task_id}-designs.zip"'}
        return Response(content=buffer.getvalue(),
                        media_type="application/zip", headers=headers)

    @app.post("/tasks/{task_id}/relaunch", status_code=201)
    def relaunch(task_id: str) -> dict:
        return service.relaunch_task(task_id)

    @app.post("/preview")
    def preview(body: PreviewBody) -> dict:
        return {"designs": service.preview(body.spec_html, body.sample,
                                           body.seed)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

    return app
