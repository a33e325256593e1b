/**
 * Console state and its pure transitions.
 *
 * Two invariants live here. First, the displayed posterior always comes
 * from the latest completed request: responses carry the monotone request
 * id they were issued with, and a response older than what is already on
 * screen is discarded. Second, a feature is observed through exactly one
 * channel (discrete state or raw value); setting one clears the other,
 * and "unknown" clears both.
 */

import type {
  EvidenceValue,
  ModelSummary,
  PredictResponse,
  WhatifResult,
} from "./types.js";

export interface DisplayedPosterior {
  pError: number;
  posterior: Record<string, number>;
  missing: string[];
  responseId: number;
  modelVersion: string;
}

export interface DisplayedWhatif {
  feature: string;
  basePError: number;
  results: WhatifResult[];
  responseId: number;
}

export interface ConsoleState {
  summary: ModelSummary | null;
  evidence: Record<string, EvidenceValue>;
  raw: Record<string, number>;
  display: DisplayedPosterior | null;
  whatif: DisplayedWhatif | null;
  alertThreshold: number;
  requestCounter: number;
  lastAppliedId: number;
  error: string | null;
}

export const DEFAULT_ALERT_THRESHOLD = 0.5;

export function initialState(): ConsoleState {
  return {
    summary: null,
    evidence: {},
    raw: {},
    display: null,
    whatif: null,
    alertThreshold: DEFAULT_ALERT_THRESHOLD,
    requestCounter: 0,
    lastAppliedId: 0,
    error: null,
  };
}

export function withSummary(state: ConsoleState, summary: ModelSummary): ConsoleState {
  return { ...state, summary, evidence: {}, raw: {}, display: null, whatif: null };
}

export function setThreshold(state: ConsoleState, threshold: number): ConsoleState {
  if (!(threshold > 0 && threshold < 1)) return state;
  return { ...state, alertThreshold: threshold };
}

function knownFeature(state: ConsoleState, feature: string): boolean {
  return !!state.summary?.features.some((f) => f.name === feature);
}

/** Observe a feature state; null marks it unknown again. */
export function setEvidence(
  state: ConsoleState,
  feature: string,
  value: EvidenceValue | null,
): ConsoleState {
  if (!knownFeature(state, feature)) return state;
  const evidence = { ...state.evidence };
  const raw = { ...state.raw };
  delete evidence[feature];
  delete raw[feature];
  if (value !== null) evidence[feature] = value;
  return { ...state, evidence, raw };
}

/** Observe a raw continuous value; null marks the feature unknown again. */
export function setRaw(
  state: ConsoleState,
  feature: string,
  value: number | null,
): ConsoleState {
  if (!knownFeature(state, feature)) return state;
  const evidence = { ...state.evidence };
  const raw = { ...state.raw };
  delete evidence[feature];
  delete raw[feature];
  if (value !== null && Number.isFinite(value)) raw[feature] = value;
  return { ...state, evidence, raw };
}

/** Hand out the next request id; the counter never goes backwards. */
export function beginRequest(state: ConsoleState): [ConsoleState, number] {
  const id = state.requestCounter + 1;
  return [{ ...state, requestCounter: id }, id];
}

export function applyPrediction(
  state: ConsoleState,
  requestId: number,
  response: PredictResponse,
): ConsoleState {
  if (requestId <= state.lastAppliedId) return state; // stale: a newer response won
  return {
    ...state,
    lastAppliedId: requestId,
    error: null,
    display: {
      pError: response.p_error,
      posterior: response.posterior,
      missing: response.missing_features,
      responseId: requestId,
      modelVersion: response.model_version,
    },
  };
}

export function applyWhatif(
  state: ConsoleState,
  requestId: number,
  feature: string,
  basePError: number,
  results: WhatifResult[],
): ConsoleState {
  if (state.whatif && requestId <= state.whatif.responseId) return state;
  return {
    ...state,
    error: null,
    whatif: {
      feature,
      basePError,
      results: sortByImpact(results),
      responseId: requestId,
    },
  };
}

export function applyFailure(
  state: ConsoleState,
  requestId: number,
  message: string,
): ConsoleState {
  if (requestId <= state.lastAppliedId) return state;
  return { ...state, error: message };
}

/** Largest absolute change first; ties keep state order for stability. */
export function sortByImpact(results: WhatifResult[]): WhatifResult[] {
  return [...results].sort(
    (a, b) =>
      Math.abs(b.delta_vs_base) - Math.abs(a.delta_vs_base) || a.state - b.state,
  );
}

export function isAlert(state: ConsoleState): boolean {
  return state.display !== null && state.display.pError >= state.alertThreshold;
}

/** The failure probability formatted the way the gauge shows it. */
export function displayedProbability(state: ConsoleState): string | null {
  return state.display === null ? null : state.display.pError.toFixed(3);
}
