"""HTTP surface for live error-probability inference.

Wraps a trained discrete model behind a small JSON API. Requests carry
whatever evidence the control room has at that moment; inference sums out
everything unobserved, which is the whole point of deploying this family.
The model snapshot is immutable and swapped atomically on reload, so every
request is served by exactly one model version, echoed in each response.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware

from .. import bayes, logistic
from ..errors import ContractError, InputError, NumericalError, OpresponseError
from ..evidence import predict_payload, whatif_payload
from ..util import sha256_text
from .schemas import (
    EvidenceRequest,
    FeatureSummary,
    HealthResponse,
    LrPredictRequest,
    LrPredictResponse,
    ModelSummary,
    PredictResponse,
    ReloadRequest,
    ReloadResponse,
    WhatifRequest,
    WhatifResponse,
)


@dataclass(frozen=True)
class Snapshot:
    """One immutable model generation."""

    model: bayes.BnModel
    version: str
    lr_model: Optional[logistic.LrModel] = None


def load_snapshot(model_path: str | Path, lr_model_path: Optional[str | Path] = None) -> Snapshot:
    text = Path(model_path).read_text()
    model = bayes.model_from_json(text)
    lr_model = None
    if lr_model_path:
        lr_model = logistic.model_from_json(Path(lr_model_path).read_text())
    return Snapshot(model=model, version=sha256_text(text)[:12], lr_model=lr_model)


def snapshot_from_models(
    model: bayes.BnModel, lr_model: Optional[logistic.LrModel] = None
) -> Snapshot:
    text = bayes.model_to_json(model)
    return Snapshot(model=model, version=sha256_text(text)[:12], lr_model=lr_model)


def create_app(
    model_path: Optional[str | Path] = None,
    lr_model_path: Optional[str | Path] = None,
    snapshot: Optional[Snapshot] = None,
) -> FastAPI:
    app = FastAPI(title="opresponse risk service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if snapshot is None and model_path is not None:
        snapshot = load_snapshot(model_path, lr_model_path)
    app.state.snapshot = snapshot

    def current() -> Snapshot:
        snap = app.state.snapshot
        if snap is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        return snap

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        snap = app.state.snapshot
        return HealthResponse(
            status="ok",
            model_loaded=snap is not None,
            lr_loaded=snap is not None and snap.lr_model is not None,
            model_version=snap.version if snap else None,
        )

    @app.get("/model", response_model=ModelSummary, response_model_exclude_none=True)
    def model_summary(include_cpts: bool = Query(default=False)) -> ModelSummary:
        snap = current()
        model = snap.model
        features = [
            FeatureSummary(
                name=nd.name,
                states=list(nd.state_labels),
                parent=nd.parent,
                cuts=list(model.cuts[nd.name]) if nd.name in model.cuts else None,
            )
            for nd in model.nodes
        ]
        cpts = (
            {nd.name: nd.cpt.tolist() for nd in model.nodes} if include_cpts else None
        )
        return ModelSummary(
            kind=model.kind,
            class_states=list(model.class_states),
            prior=model.prior.tolist(),
            root=model.root,
            features=features,
            smoothing=model.alpha,
            model_version=snap.version,
            cpts=cpts,
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict(request: EvidenceRequest) -> PredictResponse:
        snap = current()
        payload = _guarded(
            lambda: predict_payload(snap.model, request.evidence, request.raw)
        )
        return PredictResponse(model_version=snap.version, **payload)

    @app.post("/whatif", response_model=WhatifResponse)
    def whatif(request: WhatifRequest) -> WhatifResponse:
        snap = current()
        payload = _guarded(
            lambda: whatif_payload(
                snap.model,
                request.evidence,
                request.raw,
                [{"feature": o.feature, "state": o.state} for o in request.overrides],
            )
        )
        return WhatifResponse(model_version=snap.version, **payload)

    @app.post("/predict-lr", response_model=LrPredictResponse)
    def predict_lr(request: LrPredictRequest) -> LrPredictResponse:
        snap = current()
        if snap.lr_model is None:
            raise HTTPException(status_code=503, detail="no logistic model loaded")
        p = _guarded(lambda: logistic.predict_proba(snap.lr_model, request.values))
        return LrPredictResponse(
            p_error=p,
            features=list(snap.lr_model.feature_names),
            model_version=snap.version,
        )

    @app.post("/reload", response_model=ReloadResponse)
    def reload(request: ReloadRequest) -> ReloadResponse:
        snap = app.state.snapshot
        model_path_new = request.model_path or getattr(snap, "source_path", None)
        if model_path_new is None:
            raise HTTPException(status_code=400, detail="model_path required")
        try:
            new_snap = load_snapshot(model_path_new, request.lr_model_path)
        except (OSError, OpresponseError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"reload failed: {exc}")
        app.state.snapshot = new_snap  # single reference swap: atomic
        return ReloadResponse(
            model_version=new_snap.version,
            lr_loaded=new_snap.lr_model is not None,
        )

    return app


def _guarded(fn):
    """Map library errors onto HTTP codes: misuse 400, bad values 422."""
    try:
        return fn()
    except ContractError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    except InputError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except NumericalError as exc:
        raise HTTPException(status_code=500, detail=str(exc))
