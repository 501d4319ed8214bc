"""HTTP retrieval service: a read-only JSON API over loaded artifacts.

The service exposes the two-stage pipeline for interactive use (versioned
under ``/v1``):

* ``POST /v1/retrieve`` — parse a new trouble report's headline and
  observation, build its query bundle with the requested active criteria,
  run the pipeline, and return ranked results with per-criterion score
  breakdowns and the weights used;
* ``GET /v1/tr/{tr_id}`` — fetch one corpus TR in full (headline,
  observation fields, accepted answer);
* ``GET /v1/health`` — liveness plus corpus/provider identifiers.

The loaded artifacts are immutable; requests share them without locking.
Each retrieval runs in a worker thread and must finish within the configured
deadline or the request fails with 504 (the worker itself is not cancelled —
it finishes and its result is dropped).  Error responses are JSON of the
shape ``{"error": <category>, "message": <detail>}`` with categories
``bad_request`` (400), ``unknown_tr`` (404), ``index_not_loaded`` (503) and
``deadline_exceeded`` (504).

Environment: only ``CREST_PORT`` and ``CREST_ARTIFACTS`` are read (by the
CLI ``serve`` command); everything else is constructor arguments.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from typing import Dict, List, Optional

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ._version import __version__
from .artifacts import ServiceBundle
from .ensemble import ScoreBreakdown
from .pipeline import PipelineConfig, run_two_stage
from .tr_core import (
    CriterionKind,
    MissingTroubleDescription,
    TroubleReport,
    build_query_bundle,
    parse_observation,
)

DEFAULT_DEADLINE_SECONDS = 10.0
DEFAULT_EXCERPT_CHARS = 240


class RetrieveRequest(BaseModel):
    """Retrieval request for a new, not-yet-filed trouble report."""

    headline: str = ""
    observation_raw: str = ""
    #: Criterion names to keep active (``None`` = every criterion found in
    #: the observation); unknown names are a 400.
    active: Optional[List[str]] = None
    #: Candidates the first stage hands to the re-ranker.
    k: int = Field(default=50, ge=1)
    #: Ranked results returned to the caller.
    max_results: int = Field(default=10, ge=1)
    #: Stage overrides: disable the re-ranking stage entirely, or run either
    #: stage with the plain base query instead of the criterion ensemble.
    rerank: bool = True
    ir_ensemble: bool = True
    rr_ensemble: bool = True


def _error(status: int, category: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": category, "message": message}
    )


def _weights_used(
    breakdown: ScoreBreakdown, bundle: ServiceBundle, rr_stage: bool
) -> Dict[str, float]:
    """Effective (renormalized) weights behind one breakdown's aggregate."""

    if not breakdown.scores:
        return {}
    weights = bundle.models.rr.weights if rr_stage else bundle.models.ir.weights
    values = {c: weights.values.get(c, 0.0) for c in breakdown.scores}
    total = sum(values.values())
    if total <= 0.0:
        return {c.value: 0.0 for c in values}
    return {c.value: v / total for c, v in values.items()}


def _result_payload(
    breakdown: ScoreBreakdown,
    rank: int,
    bundle: ServiceBundle,
    excerpt_chars: int,
    rr_stage: bool,
) -> dict:
    tr = bundle.by_id.get(breakdown.doc_id)
    headline = tr.headline if tr is not None else ""
    answer = tr.answer if tr is not None else ""
    return {
        "rank": rank,
        "tr_id": breakdown.doc_id,
        "headline": headline,
        "answer_excerpt": answer[:excerpt_chars],
        "aggregated": breakdown.aggregated,
        "scores": {c.value: s.value for c, s in breakdown.scores.items()},
        "raw_scores": {c.value: v for c, v in breakdown.raw.items()},
        "weights_used": _weights_used(breakdown, bundle, rr_stage),
    }


def _run_retrieval(
    bundle: ServiceBundle, request: RetrieveRequest, excerpt_chars: int
) -> dict:
    observation = parse_observation(request.observation_raw or "")
    query = TroubleReport(
        id="QUERY",
        headline=request.headline or "",
        observation=observation,
        answer="",
    )
    active = None
    if request.active is not None:
        active = [CriterionKind.from_name(name) for name in request.active]
    query_bundle = build_query_bundle(query, active=active)

    config = PipelineConfig(
        k=request.k,
        ir_ensemble=request.ir_ensemble,
        rr_ensemble=request.rr_ensemble,
        rr_scorer="cross" if request.rerank else "none",
    )
    breakdowns = run_two_stage(query_bundle, bundle.index, bundle.models, config)
    rr_stage = request.rerank

    requested = (
        [c.value for c in active]
        if active is not None
        else [c.value for c in query_bundle.active]
    )
    effective = [c.value for c in query_bundle.active]
    missing = [name for name in requested if name not in effective]
    results = [
        _result_payload(b, rank, bundle, excerpt_chars, rr_stage)
        for rank, b in enumerate(breakdowns[: request.max_results], start=1)
    ]
    return {
        "results": results,
        "diagnostics": {
            "active_requested": requested,
            "active_effective": effective,
            "missing_criteria": missing,
            "base_mode": not query_bundle.active,
            "parse": [
                {
                    "kind": d.kind,
                    "criterion": d.criterion.value if d.criterion else None,
                    "detail": d.detail,
                }
                for d in observation.diagnostics
            ],
        },
        "k": request.k,
        "rerank": request.rerank,
    }


def create_app(
    bundle: Optional[ServiceBundle] = None,
    deadline_seconds: float = DEFAULT_DEADLINE_SECONDS,
    excerpt_chars: int = DEFAULT_EXCERPT_CHARS,
) -> FastAPI:
    """Build the API application around one immutable artifact bundle.

    ``bundle=None`` starts the service without artifacts; every retrieval
    then answers 503 (useful for health probes while artifacts build).
    """

    app = FastAPI(title="crest retrieval service", version=__version__)
    app.state.bundle = bundle
    app.state.deadline_seconds = deadline_seconds
    app.state.excerpt_chars = excerpt_chars
    app.state.executor = ThreadPoolExecutor(max_workers=4)

    @app.exception_handler(RequestValidationError)
    async def malformed(request, exc):  # pragma: no cover - thin adapter
        return _error(400, "bad_request", str(exc))

    @app.get("/v1/health")
    def health() -> dict:
        loaded = app.state.bundle is not None
        info = {
            "status": "ok" if loaded else "no_artifacts",
            "version": __version__,
        }
        if loaded:
            info["n_documents"] = len(app.state.bundle.index)
            info["corpus_hash"] = app.state.bundle.index.corpus_hash
            info["provider_version"] = app.state.bundle.index.provider_version
        return info

    @app.get("/v1/tr/{tr_id}")
    def get_tr(tr_id: str):
        bundle_ = app.state.bundle
        if bundle_ is None:
            return _error(503, "index_not_loaded", "service started without artifacts")
        tr = bundle_.by_id.get(tr_id)
        if tr is None:
            return _error(404, "unknown_tr", f"no trouble report with id {tr_id!r}")
        return {
            "tr_id": tr.id,
            "headline": tr.headline,
            "observation_raw": tr.observation.raw,
            "criteria": {c.value: text for c, text in tr.observation.criteria.items()},
            "answer": tr.answer,
        }

    @app.post("/v1/retrieve")
    def retrieve(request: RetrieveRequest):
        bundle_ = app.state.bundle
        if bundle_ is None:
            return _error(503, "index_not_loaded", "service started without artifacts")
        if not (request.headline.strip() or request.observation_raw.strip()):
            return _error(
                400, "bad_request", "headline or observation_raw must be non-empty"
            )
        try:
            future = app.state.executor.submit(
                _run_retrieval, bundle_, request, app.state.excerpt_chars
            )
            return future.result(timeout=app.state.deadline_seconds)
        except FutureTimeout:
            return _error(
                504,
                "deadline_exceeded",
                f"retrieval exceeded {app.state.deadline_seconds:.1f}s",
            )
        except (ValueError, MissingTroubleDescription) as exc:
            return _error(400, "bad_request", str(exc))

    return app
