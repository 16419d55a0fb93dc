"""HTTP recognition service.

A thin wrapper over a loaded recognizer: one POST endpoint accepting
ink in the native wire format plus an optional candidate count, and a
health endpoint reporting the model version.  Responses for the same
model and ink are deterministic apart from ``timing_ms``.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .ink import MAX_POINTS, MAX_STROKES, InkParseError, parse_native
from .recognizer import Recognizer


class RecognizeRequest(BaseModel):
    strokes: list[list[list[float]]]
    topk: int = Field(default=5, ge=1, le=50)


class Candidate(BaseModel):
    latex: str
    probability: float


class SegmentOut(BaseModel):
    strokes: list[int]
    label: str
    probability: float


class RelationOut(BaseModel):
    parent_strokes: list[int]
    child_strokes: list[int]
    relation: str


class RecognizeResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    latex: str
    probability: float
    parsed: bool
    candidates: list[Candidate]
    segments: list[SegmentOut]
    relations: list[RelationOut]
    model_version: str
    timing_ms: float


class HealthResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    status: str
    model_version: str


def create_app(recognizer: Recognizer, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="inkmath", version="0.1.0")

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", model_version=recognizer.model_version)

    @app.post("/v1/recognize", response_model=RecognizeResponse)
    def recognize(request: RecognizeRequest) -> RecognizeResponse:
        if len(request.strokes) > MAX_STROKES:
            raise HTTPException(
                status_code=413,
                detail=f"too many strokes: {len(request.strokes)} (limit {MAX_STROKES})",
            )
        total_points = sum(len(s) for s in request.strokes)
        if total_points > MAX_POINTS:
            raise HTTPException(
                status_code=413,
                detail=f"too many points: {total_points} (limit {MAX_POINTS})",
            )
        try:
            ink = parse_native({"strokes": request.strokes})
        except InkParseError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        start = time.perf_counter()
        result = recognizer.recognize(ink, topk=request.topk)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return RecognizeResponse(
            latex=result.latex,
            probability=result.probability,
            parsed=result.parsed,
            candidates=[Candidate(latex=l, probability=p) for l, p in result.candidates],
            segments=[
                SegmentOut(strokes=list(s.strokes), label=s.label, probability=s.probability)
                for s in result.segments
            ],
            relations=[
                RelationOut(
                    parent_strokes=list(r.parent_strokes),
                    child_strokes=list(r.child_strokes),
                    relation=r.relation,
                )
                for r in result.relations
            ],
            model_version=recognizer.model_version,
            timing_ms=elapsed_ms,
        )

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")

    return app
