"""HTTP endpoints. All bodies are UTF-8 JSON.

    POST   /papers                      -> 201 {doc_id}
    GET    /papers/{id}/analysis        -> 200 analysis view
    POST   /papers/{id}/corrections     -> 201 {correction_id}
    GET    /rules                       -> 200 [rule...]
    POST   /rules                       -> 201 rule
    DELETE /rules/{id}                  -> 200 {deleted}
    POST   /retrain                     -> 202 {job_id}
    GET    /retrain/{job_id}            -> 200 job status
    GET    /health                      -> 200 version block
"""

from __future__ import annotations

import json
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .. import __version__
from ..mapping import RulePatternError
from .state import CorrectionError, ServiceConfig, ServiceState


class PaperBody(BaseModel):
    title: str = ""
    abstract: str = ""


class CorrectionBody(BaseModel):
    kind: str
    entity_id: Optional[str] = None
    sentence_index: Optional[int] = None
    start: Optional[int] = None
    end: Optional[int] = None
    new_label: Optional[str] = None
    label: Optional[str] = None

    def payload(self) -> dict:
        data = self.model_dump(exclude_none=True)
        data.pop("kind", None)
        return data


class RuleBody(BaseModel):
    target: str
    pattern: str


class RetrainBody(BaseModel):
    slot: str


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="picopipe review service", version=__version__)
    app.state.pipeline = state
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "package": __version__, "versions": state.versions()}

    @app.post("/papers", status_code=201)
    def submit_paper(body: PaperBody) -> dict:
        if not body.title.strip() and not body.abstract.strip():
            raise HTTPException(400, "title and abstract are both empty")
        if not state.models_ready():
            raise HTTPException(503, "models not loaded")
        snapshot = state.model_snapshot()
        doc_id = state.new_doc_id()
        view = state.analyze(doc_id, body.title, body.abstract, snapshot)
        state.store_document(doc_id, body.title, body.abstract, view)
        return {"doc_id": doc_id}

    @app.get("/papers/{doc_id}/analysis")
    def get_analysis(doc_id: str) -> dict:
        view = state.get_view(doc_id)
        if view is None:
            raise HTTPException(404, f"unknown document {doc_id!r}")
        return view

    @app.post("/papers/{doc_id}/corrections", status_code=201)
    def post_correction(doc_id: str, body: CorrectionBody) -> dict:
        try:
            correction_id, _ = state.record_correction(doc_id, body.kind, body.payload())
        except KeyError:
            raise HTTPException(404, f"unknown document {doc_id!r}")
        except CorrectionError as exc:
            raise HTTPException(422, str(exc))
        return {"correction_id": correction_id}

    @app.get("/rules")
    def get_rules() -> list:
        return state.list_rules()

    @app.post("/rules", status_code=201)
    def post_rule(body: RuleBody) -> dict:
        try:
            return state.add_rule(body.target, body.pattern)
        except FileExistsError as exc:
            raise HTTPException(409, str(exc))
        except RulePatternError as exc:
            raise HTTPException(422, str(exc))

    @app.delete("/rules/{rule_id}")
    def delete_rule(rule_id: str) -> dict:
        try:
            state.delete_rule(rule_id)
        except KeyError:
            raise HTTPException(404, f"unknown rule {rule_id!r}")
        return {"deleted": rule_id}

    @app.post("/retrain", status_code=202)
    def post_retrain(body: RetrainBody) -> dict:
        try:
            job_id = state.start_retrain(body.slot)
        except ValueError as exc:
            raise HTTPException(422, str(exc))
        except PermissionError as exc:
            detail = json.loads(str(exc))
            detail["error"] = "not enough corrections accumulated"
            raise HTTPException(409, detail)
        except FileExistsError as exc:
            raise HTTPException(409, str(exc))
        return {"job_id": job_id}

    @app.get("/retrain/{job_id}")
    def get_job(job_id: str) -> dict:
        job = state.job_status(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job

    return app
