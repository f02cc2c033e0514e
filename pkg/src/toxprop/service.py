"""HTTP scoring and explanation service.

The app wraps one immutable model artifact. Every endpoint is a pure read,
so a fixed request gets an identical response under any interleaving of
concurrent requests. There are no training endpoints: retraining happens
offline via the CLI, and a new model means a new app (or process).

Error contract: malformed request bodies return 400 with a machine-readable
``error`` code; structurally valid requests the model cannot serve (scheme
incompatible with the model kind, degenerate input) return 422.
"""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .artifact import ModelArtifact
from .data import TITLE_BODY_SEPARATOR
from .errors import ConfigError, DegenerateInput
from .explain import explain as explain_text
from .models import score_payload

CURVE_POINTS = 101


class ScoreRequest(BaseModel):
    title: str
    body: str


class ExplainRequest(BaseModel):
    title: str
    body: str
    scheme: Literal["sm", "dp", "hb", "as", "rc"]
    objective: Literal["mean", "mode"] = "mean"
    k: int | None = Field(default=None, ge=1)


def _joined(title: str, body: str) -> str:
    return title + TITLE_BODY_SEPARATOR + body


def create_app(artifact: ModelArtifact) -> FastAPI:
    app = FastAPI(title="toxprop scoring service", version=__version__)
    # The browser editor runs on its own origin; every endpoint is a pure
    # read, so blanket CORS costs nothing.
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    model = artifact.model

    @app.exception_handler(RequestValidationError)
    async def invalid_request(_request: Request, exc: RequestValidationError) -> JSONResponse:
        detail = [
            {"loc": list(err.get("loc", ())), "msg": err.get("msg"), "type": err.get("type")}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"error": "invalid_request", "detail": detail})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "kind": artifact.kind, "version": __version__}

    @app.get("/model/info")
    def model_info() -> dict:
        return {
            "kind": artifact.kind,
            "format_version": artifact.version,
            "metadata": dict(artifact.metadata),
        }

    @app.post("/score")
    def score(req: ScoreRequest) -> dict:
        return score_payload(model, _joined(req.title, req.body), curve_points=CURVE_POINTS)

    @app.post("/explain")
    def explain(req: ExplainRequest):
        try:
            report = explain_text(
                model, _joined(req.title, req.body), req.scheme.upper(), req.objective, k=req.k
            )
        except ConfigError as exc:
            return JSONResponse(
                status_code=422, content={"error": "incompatible_scheme", "detail": str(exc)}
            )
        except DegenerateInput as exc:
            return JSONResponse(
                status_code=422, content={"error": "degenerate_input", "detail": str(exc)}
            )
        return report.to_dict()

    return app
