/**
 * Shapes of the risk-service JSON payloads.
 */

export interface FeatureSummary {
  name: string;
  states: string[];
  parent: string | null;
  /** Cut points for discretized features; absent for categorical ones. */
  cuts?: number[] | null;
}

export interface ModelSummary {
  kind: string;
  class_states: string[];
  prior: number[];
  root: string | null;
  features: FeatureSummary[];
  smoothing: number;
  model_version: string;
}

export interface EvidenceUsed {
  state: number;
  label: string;
  source: string;
  value?: number;
}

export interface PredictResponse {
  p_error: number;
  posterior: Record<string, number>;
  evidence_used: Record<string, EvidenceUsed>;
  missing_features: string[];
  model_version: string;
}

export interface WhatifOverride {
  feature: string;
  state: number | string;
}

export interface WhatifResult {
  feature: string;
  state: number;
  label: string;
  p_error: number;
  delta_vs_base: number;
}

export interface WhatifResponse {
  base_p_error: number;
  results: WhatifResult[];
  model_version: string;
}

export interface HealthResponse {
  status: string;
  model_loaded: boolean;
  lr_loaded: boolean;
  model_version: string | null;
}

/** A discrete observation: state index or state label. */
export type EvidenceValue = number | string;
