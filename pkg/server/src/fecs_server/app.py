"""HTTP application implementing the wire protocol over a model service.

Endpoints exchange UTF-8 JSON. Malformed input gets status 400 with
{"error": ...}, context overflow 413, model failure 500. Forward passes are
serialized behind a lock so identical requests always produce identical
responses.
"""

from __future__ import annotations

import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .service import ModelService, ServerConfig

PROTOCOL_VERSION = 1


class OverflowError_(Exception):
    pass


class TokenizeBody(BaseModel):
    text: str


class DetokenizeBody(BaseModel):
    ids: list[int]


class NextBody(BaseModel):
    ids: list[int]
    top_m: int | None = None


class ContextHiddensBody(BaseModel):
    ids: list[int]


class CandidateHiddensBody(BaseModel):
    ids: list[int]
    candidates: list[int]


def create_app(service: ModelService, cfg: ServerConfig | None = None) -> FastAPI:
    top_m_default = cfg.top_m_default if cfg else 512
    app = FastAPI(title="fecs model server", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:1])})

    @app.exception_handler(ValueError)
    async def on_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(OverflowError_)
    async def on_overflow(request: Request, exc: OverflowError_):
        return JSONResponse(status_code=413, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def on_failure(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    def check_ids(ids: list[int], extra: int = 0) -> None:
        if not ids:
            raise ValueError("ids must be non-empty")
        for tid in ids:
            if not 0 <= tid < service.vocab_size:
                raise ValueError(f"unknown token id {tid}")
        if len(ids) + extra > service.max_context:
            raise OverflowError_(
                f"context of {len(ids)} tokens exceeds max_context {service.max_context}"
            )

    @app.get("/info")
    def info():
        return {
            "vocab_size": service.vocab_size,
            "hidden_dim": service.hidden_dim,
            "eos_id": service.eos_id,
            "max_context": service.max_context,
            "name": service.name,
            "protocol_version": PROTOCOL_VERSION,
        }

    @app.post("/tokenize")
    def tokenize(body: TokenizeBody):
        return {"ids": service.encode(body.text)}

    @app.post("/detokenize")
    def detokenize(body: DetokenizeBody):
        for tid in body.ids:
            if not 0 <= tid < service.vocab_size:
                raise ValueError(f"unknown token id {tid}")
        return {"text": service.decode(body.ids)}

    @app.post("/next")
    def next_distribution(body: NextBody):
        check_ids(body.ids)
        top_m = body.top_m if body.top_m is not None else min(top_m_default, service.vocab_size)
        if not 1 <= top_m <= service.vocab_size:
            raise ValueError(f"top_m must be in [1, {service.vocab_size}], got {top_m}")
        with lock:
            probs = service.next_probs(body.ids)
        order = np.argsort(-probs, kind="stable")[:top_m]
        entries = [
            {"id": int(tid), "prob": float(probs[tid])} for tid in order if probs[tid] > 0.0
        ]
        return {
            "top": entries,
            "truncation_mass": float(sum(item["prob"] for item in entries)),
        }

    @app.post("/context_hiddens")
    def context_hiddens(body: ContextHiddensBody):
        check_ids(body.ids)
        with lock:
            hiddens = service.hiddens(body.ids)
        return {"hiddens": hiddens.tolist()}

    @app.post("/candidate_hiddens")
    def candidate_hiddens(body: CandidateHiddensBody):
        check_ids(body.ids, extra=1)
        if not body.candidates:
            raise ValueError("candidates must be non-empty")
        if len(set(body.candidates)) != len(body.candidates):
            raise ValueError("candidate token ids must be unique")
        for tid in body.candidates:
            if not 0 <= tid < service.vocab_size:
                raise ValueError(f"unknown token id {tid}")
        with lock:
            hiddens = service.candidate_hiddens(body.ids, body.candidates)
        return {"hiddens": hiddens.tolist()}

    return app
