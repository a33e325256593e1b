"""Request and response bodies for the error-probability service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class EvidenceRequest(BaseModel):
    """Partial observation of the model's features.

    evidence maps feature name to a state index or state label; raw maps
    feature name to a continuous value to be discretized through the cut
    points stored with the model.
    """

    evidence: dict[str, Any] = Field(default_factory=dict)
    raw: dict[str, Any] = Field(default_factory=dict)


class PredictResponse(BaseModel):
    p_error: float
    posterior: dict[str, float]
    evidence_used: dict[str, dict]
    missing_features: list[str]
    model_version: str


class WhatifOverride(BaseModel):
    feature: str
    state: Any


class WhatifRequest(BaseModel):
    evidence: dict[str, Any] = Field(default_factory=dict)
    raw: dict[str, Any] = Field(default_factory=dict)
    overrides: list[WhatifOverride] = Field(default_factory=list)


class WhatifResult(BaseModel):
    feature: str
    state: int
    label: str
    p_error: float
    delta_vs_base: float


class WhatifResponse(BaseModel):
    base_p_error: float
    results: list[WhatifResult]
    model_version: str


class FeatureSummary(BaseModel):
    name: str
    states: list[str]
    parent: Optional[str]
    cuts: Optional[list[float]]


class ModelSummary(BaseModel):
    kind: str
    class_states: list[str]
    prior: list[float]
    root: Optional[str]
    features: list[FeatureSummary]
    smoothing: float
    model_version: str
    cpts: Optional[dict[str, list]] = None


class LrPredictRequest(BaseModel):
    values: dict[str, float]


class LrPredictResponse(BaseModel):
    p_error: float
    features: list[str]
    model_version: str


class HealthResponse(BaseModel):
    status: str
    model_loaded: bool
    lr_loaded: bool
    model_version: Optional[str]


class ReloadRequest(BaseModel):
    model_path: Optional[str] = None
    lr_model_path: Optional[str] = None


class ReloadResponse(BaseModel):
    model_version: str
    lr_loaded: bool
