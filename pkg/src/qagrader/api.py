"""HTTP API serving the instructor review workflow.

Resources:
    GET  /assignments                      list assignment summaries
    POST /assignments                      ingest an assignment document
    GET  /assignments/{id}/items           evaluation items (with versions)
    GET  /assignments/{id}/responses       response corpus
    POST /items/{item_id}/approve          {chosen_text, instruction?, version, revise?}
    POST /runs                             {assignment_id, backend, shot_set? | shot_config?}
    GET  /runs                             run summaries
    GET  /runs/{id}                        status + progress + cells (+ doc version)
    GET  /runs/{id}/reports                per-response score reports + histogram
    GET  /labels/disagreements             reconciliation queue
    POST /disagreements/{key}/resolve      {label, version, resolver_id?}
    POST /cells/{cell_id}/relevance        {flag, annotator_id, version}

Every mutating endpoint enforces optimistic versioning: a stale version is a
409 and the caller must refetch. Unknown resources are 404; invalid payloads
or unmet pipeline preconditions are 422.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import agreement as agreement_mod
from . import grading, models, questions, scoring, shots
from .errors import (
    ConflictError,
    NotFoundError,
    QAGraderError,
    ValidationError,
    VersionConflictError,
)
from .store import (
    load_ws_assignment,
    load_ws_feedback,
    load_ws_items,
    load_ws_responses,
    make_completion_backend,
)
from .workspace import (
    KIND_ASSIGNMENT,
    KIND_ITEMS,
    KIND_RECONCILIATION,
    KIND_RESPONSES,
    KIND_RUN,
    Workspace,
    new_run_id,
)


class ApproveRequest(BaseModel):
    chosen_text: str
    instruction: str | None = None
    version: int
    revise: bool = False


class ShotConfig(BaseModel):
    method: str = shots.METHOD_RANDOM
    k: int = 0
    seed: int = 0
    embedding_dim: int = 64


class RunRequest(BaseModel):
    assignment_id: str
    backend: str = "oracle"
    shot_set: str | None = None
    shot_config: ShotConfig | None = None
    workers: int = 1


class ResolveRequest(BaseModel):
    label: int
    version: int
    resolver_id: str | None = None


class RelevanceRequest(BaseModel):
    flag: str
    annotator_id: str
    version: int


def create_app(ws: Workspace, config: dict | None = None, ui_dir: str | None = None) -> FastAPI:
    config = config or {}
    app = FastAPI(title="qagrader", version="0.1.0")
    write_lock = threading.Lock()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(QAGraderError)
    async def _domain_error(request: Request, exc: QAGraderError):
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, (VersionConflictError, ConflictError)):
            status = 409
        else:
            status = 422
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    # -- assignments ----------------------------------------------------------

    @app.get("/assignments")
    def list_assignments():
        out = []
        for assignment_id in ws.list(KIND_ASSIGNMENT):
            doc, version = ws.load(KIND_ASSIGNMENT, assignment_id)
            out.append({**doc, "version": version})
        return out

    @app.post("/assignments", status_code=201)
    def ingest_assignment(doc: dict):
        assignment = models.load_assignment(doc)
        version = ws.save(KIND_ASSIGNMENT, assignment.id, assignment.to_dict())
        return {"id": assignment.id, "version": version}

    @app.get("/assignments/{assignment_id}/items")
    def get_items(assignment_id: str):
        items, doc_version = load_ws_items(ws, assignment_id)
        return {
            "assignment_id": assignment_id,
            "document_version": doc_version,
            "items": [
                {**item.to_dict(), "item_ref": f"{assignment_id}:{item.item_id}"}
                for item in items
            ],
        }

    @app.get("/assignments/{assignment_id}/responses")
    def get_responses(assignment_id: str):
        doc, _ = ws.load(KIND_RESPONSES, assignment_id)
        return {"assignment_id": assignment_id, "responses": doc["responses"]}

    # -- item approval ---------------------------------------------------------

    def _locate_item(item_ref: str) -> tuple[str, str]:
        if ":" in item_ref:
            assignment_id, item_id = item_ref.split(":", 1)
            return assignment_id, item_id
        owners = [
            aid
            for aid in ws.list(KIND_ITEMS)
            if any(i.item_id == item_ref for i in load_ws_items(ws, aid)[0])
        ]
        if not owners:
            raise NotFoundError(f"no item {item_ref!r}")
        if len(owners) > 1:
            raise ValidationError(
                f"item {item_ref!r} exists in several assignments; use ASSIGNMENT:ITEM"
            )
        return owners[0], item_ref

    @app.post("/items/{item_ref}/approve")
    def approve_item(item_ref: str, body: ApproveRequest):
        assignment_id, item_id = _locate_item(item_ref)
        with write_lock:
            items, doc_version = load_ws_items(ws, assignment_id)
            by_id = {i.item_id: i for i in items}
            if item_id not in by_id:
                raise NotFoundError(f"no item {item_id!r}")
            item = by_id[item_id]
            if item.version != body.version:
                raise VersionConflictError(
                    f"item {item_id} is at version {item.version}, caller sent {body.version}"
                )
            updated = questions.approve_question(
                item, body.chosen_text, body.instruction, revise=body.revise
            )
            by_id[item_id] = updated
            ordered = [by_id[i.item_id] for i in items]
            ws.save(
                KIND_ITEMS,
                assignment_id,
                questions.items_to_document(assignment_id, ordered),
                expected_version=doc_version,
            )
        return {**updated.to_dict(), "item_ref": f"{assignment_id}:{item_id}"}

    # -- runs -------------------------------------------------------------------

    def _run_payload(run: grading.GradingRun, version: int) -> dict:
        return {**run.to_dict(), "progress": run.progress(), "version": version}

    def _grade_in_thread(run_id: str, backend_name: str, workers: int) -> None:
        doc, _ = ws.load(KIND_RUN, run_id)
        run = grading.GradingRun.from_dict(doc)
        assignment = load_ws_assignment(ws, run.assignment_id)
        responses = load_ws_responses(ws, run.assignment_id)
        items, _ = load_ws_items(ws, run.assignment_id)
        backend = make_completion_backend(backend_name, config)
        try:
            grading.grade_matrix(
                run,
                backend,
                assignment=assignment,
                items=items,
                corpus=responses,
                on_cell=lambda current: ws.save(KIND_RUN, run_id, current.to_dict()),
                max_workers=workers,
            )
        except QAGraderError:
            pass  # status already reflects the failure
        finally:
            ws.save(KIND_RUN, run_id, run.to_dict())

    @app.post("/runs", status_code=201)
    def launch_run(body: RunRequest):
        assignment = load_ws_assignment(ws, body.assignment_id)
        responses = load_ws_responses(ws, body.assignment_id)
        items, _ = load_ws_items(ws, body.assignment_id)
        pending = [i.item_id for i in items if not i.approved]
        if pending:
            raise ValidationError(f"items not approved yet: {', '.join(pending)}")
        make_completion_backend(body.backend, config)  # fail fast on bad config

        if body.shot_set:
            doc, _ = ws.load("shotset", body.shot_set)
            shot_set = shots.ShotSet.from_dict(doc)
        else:
            cfg = body.shot_config or ShotConfig()
            if cfg.k == 0:
                shot_set = shots.ShotSet(
                    method=shots.METHOD_RANDOM,
                    k=0,
                    seed=cfg.seed,
                    shot_ids=(),
                    eval_ids=tuple(r.id for r in responses),
                )
            elif cfg.method == shots.METHOD_CLUSTERING:
                from .gateway import TestEmbeddingBackend

                matrix = shots.embed_responses(responses, TestEmbeddingBackend(cfg.embedding_dim))
                shot_set = shots.select_shots(responses, matrix, cfg.k, cfg.seed)
            else:
                shot_set = shots.random_shots(responses, cfg.k, cfg.seed)
            if cfg.k > 0:
                shot_set = shot_set.with_feedback(load_ws_feedback(ws, body.assignment_id))

        run = grading.GradingRun(
            run_id=new_run_id(),
            assignment_id=assignment.id,
            shot_set=shot_set,
            backend_id=body.backend,
            item_ids=tuple(i.item_id for i in items),
        )
        ws.save(KIND_RUN, run.run_id, run.to_dict())
        thread = threading.Thread(
            target=_grade_in_thread, args=(run.run_id, body.backend, body.workers), daemon=True
        )
        thread.start()
        return {"run_id": run.run_id, "status": run.status}

    @app.get("/runs")
    def list_runs():
        out = []
        for run_id in ws.list(KIND_RUN):
            doc, version = ws.load(KIND_RUN, run_id)
            run = grading.GradingRun.from_dict(doc)
            out.append(
                {
                    "run_id": run.run_id,
                    "assignment_id": run.assignment_id,
                    "status": run.status,
                    "backend": run.backend_id,
                    "shots": run.shot_set.k,
                    "progress": run.progress(),
                    "version": version,
                }
            )
        return out

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        doc, version = ws.load(KIND_RUN, run_id)
        return _run_payload(grading.GradingRun.from_dict(doc), version)

    @app.get("/runs/{run_id}/reports")
    def get_reports(run_id: str):
        doc, _ = ws.load(KIND_RUN, run_id)
        run = grading.GradingRun.from_dict(doc)
        assignment = load_ws_assignment(ws, run.assignment_id)
        reports, histogram = scoring.score_run(run, assignment.rubric)
        return {
            "run_id": run_id,
            "histogram": histogram,
            "reports": [r.to_dict() for r in reports],
        }

    # -- relevance annotation ----------------------------------------------------

    @app.post("/cells/{cell_id}/relevance")
    def annotate_cell(cell_id: str, body: RelevanceRequest):
        parts = cell_id.split(":")
        if len(parts) != 3:
            raise ValidationError("cell id must be RUN_ID:RESPONSE_ID:ITEM_ID")
        run_id, response_id, item_id = parts
        with write_lock:
            doc, version = ws.load(KIND_RUN, run_id)
            if version != body.version:
                raise VersionConflictError(
                    f"run {run_id} is at version {version}, caller sent {body.version}"
                )
            run = grading.GradingRun.from_dict(doc)
            cell = grading.annotate_relevance(
                run, response_id, item_id, body.flag, body.annotator_id
            )
            new_version = ws.save(KIND_RUN, run_id, run.to_dict(), expected_version=version)
        return {**cell.to_dict(), "run_id": run_id, "version": new_version}

    # -- reconciliation -----------------------------------------------------------

    def _current_reconciliation() -> tuple[str, agreement_mod.Reconciliation, int] | None:
        names = ws.list(KIND_RECONCILIATION)
        if not names:
            return None
        name = names[-1]
        doc, version = ws.load(KIND_RECONCILIATION, name)
        return name, agreement_mod.Reconciliation.from_dict(doc), version

    @app.get("/labels/disagreements")
    def get_disagreements():
        current = _current_reconciliation()
        if current is None:
            return {"reconciliation": None, "version": None, "disagreements": []}
        name, rec, version = current
        return {
            "reconciliation": name,
            "version": version,
            "grader_a": rec.grader_a,
            "grader_b": rec.grader_b,
            "complete": rec.complete,
            "disagreements": [
                {**d.to_dict(), "key": d.key} for d in rec.disagreements
            ],
        }

    @app.post("/disagreements/{key}/resolve")
    def resolve(key: str, body: ResolveRequest):
        if ":" not in key:
            raise ValidationError("disagreement key must be RESPONSE_ID:ITEM_ID")
        response_id, item_id = key.split(":", 1)
        current = _current_reconciliation()
        if current is None:
            raise NotFoundError("no reconciliation in progress")
        name, rec, version = current
        if version != body.version:
            raise VersionConflictError(
                f"reconciliation {name} is at version {version}, caller sent {body.version}"
            )
        with write_lock:
            resolved = agreement_mod.resolve_disagreement(
                rec, response_id, item_id, body.label, body.resolver_id or "api"
            )
            new_version = ws.save(
                KIND_RECONCILIATION, name, rec.to_dict(), expected_version=version
            )
        return {**resolved.to_dict(), "key": key, "version": new_version, "complete": rec.complete}

    return app
