/**
 * DOM wiring for the what-if console.
 *
 * Layout: one control per model feature (a dropdown of interval or
 * category labels with an "unknown" option, plus a raw-value input for
 * features carrying cut points), a submit action, a gauge showing the
 * failure posterior against the alert threshold, the list of features the
 * model had to marginalize over, and a what-if table per feature sorted
 * by impact. Every number on screen is traceable to a service response:
 * hovering the gauge shows the response id and model version.
 */

import { ServiceClient, ServiceError } from "./client.js";
import {
  applyFailure,
  applyPrediction,
  applyWhatif,
  beginRequest,
  ConsoleState,
  displayedProbability,
  initialState,
  isAlert,
  setEvidence,
  setRaw,
  setThreshold,
  withSummary,
} from "./state.js";
import type { EvidenceValue, WhatifOverride } from "./types.js";

const UNKNOWN = "__unknown__";

export class Console {
  private state: ConsoleState = initialState();

  constructor(
    private readonly client: ServiceClient,
    private readonly root: HTMLElement,
  ) {}

  async start(): Promise<void> {
    try {
      const summary = await this.client.model();
      this.state = withSummary(this.state, summary);
      this.render();
    } catch (err) {
      this.renderUnreachable((err as Error).message);
    }
  }

  /** Submit the current evidence; stale responses never win. */
  async submit(): Promise<void> {
    const [next, id] = beginRequest(this.state);
    this.state = next;
    try {
      const response = await this.client.predict(this.state.evidence, this.state.raw);
      this.state = applyPrediction(this.state, id, response);
    } catch (err) {
      const detail = err instanceof ServiceError ? err.detail : (err as Error).message;
      this.state = applyFailure(this.state, id, detail);
    }
    this.render();
  }

  /** Explore every state of one feature on top of the current evidence. */
  async runWhatif(feature: string): Promise<void> {
    const summary = this.state.summary;
    const featureInfo = summary?.features.find((f) => f.name === feature);
    if (!summary || !featureInfo) return;
    const overrides: WhatifOverride[] = featureInfo.states.map((_, i) => ({
      feature,
      state: i,
    }));
    const [next, id] = beginRequest(this.state);
    this.state = next;
    try {
      const response = await this.client.whatif(
        this.state.evidence,
        this.state.raw,
        overrides,
      );
      this.state = applyWhatif(this.state, id, feature, response.base_p_error,
                               response.results);
    } catch (err) {
      const detail = err instanceof ServiceError ? err.detail : (err as Error).message;
      this.state = applyFailure(this.state, id, detail);
    }
    this.render();
  }

  getState(): ConsoleState {
    return this.state;
  }

  // ------------------------------------------------------------------ DOM

  private renderUnreachable(message: string): void {
    this.root.innerHTML = "";
    const box = el("div", "console-error");
    box.textContent = `service unreachable: ${message}`;
    const retry = el("button") as HTMLButtonElement;
    retry.textContent = "retry";
    retry.addEventListener("click", () => void this.start());
    this.root.append(box, retry);
  }

  private render(): void {
    const state = this.state;
    if (!state.summary) return;
    this.root.innerHTML = "";

    const form = el("div", "evidence-form");
    for (const feature of state.summary.features) {
      const row = el("div", "feature-row");
      const label = el("label");
      label.textContent = feature.name;
      row.append(label);

      const select = el("select") as HTMLSelectElement;
      select.dataset.feature = feature.name;
      const unknown = new Option("unknown", UNKNOWN);
      select.add(unknown);
      feature.states.forEach((stateLabel, i) => {
        select.add(new Option(stateLabel, String(i)));
      });
      const current = state.evidence[feature.name];
      select.value = current === undefined ? UNKNOWN : String(current);
      select.addEventListener("change", () => {
        const value: EvidenceValue | null =
          select.value === UNKNOWN ? null : Number(select.value);
        this.state = setEvidence(this.state, feature.name, value);
        void this.submit();
      });
      row.append(select);

      if (feature.cuts && feature.cuts.length) {
        const rawInput = el("input") as HTMLInputElement;
        rawInput.type = "number";
        rawInput.step = "any";
        rawInput.placeholder = "raw value";
        rawInput.dataset.rawFor = feature.name;
        const rawCurrent = state.raw[feature.name];
        if (rawCurrent !== undefined) rawInput.value = String(rawCurrent);
        rawInput.addEventListener("change", () => {
          const parsed = rawInput.value === "" ? null : Number(rawInput.value);
          this.state = setRaw(this.state, feature.name, parsed);
          void this.submit();
        });
        row.append(rawInput);
      }

      const explore = el("button") as HTMLButtonElement;
      explore.textContent = "what if?";
      explore.dataset.whatifFor = feature.name;
      explore.addEventListener("click", () => void this.runWhatif(feature.name));
      row.append(explore);
      form.append(row);
    }
    this.root.append(form);

    const thresholdRow = el("div", "threshold-row");
    const thresholdInput = el("input") as HTMLInputElement;
    thresholdInput.type = "number";
    thresholdInput.min = "0.01";
    thresholdInput.max = "0.99";
    thresholdInput.step = "0.01";
    thresholdInput.value = String(state.alertThreshold);
    thresholdInput.addEventListener("change", () => {
      this.state = setThreshold(this.state, Number(thresholdInput.value));
      this.render();
    });
    const thresholdLabel = el("label");
    thresholdLabel.textContent = "alert threshold";
    thresholdRow.append(thresholdLabel, thresholdInput);
    this.root.append(thresholdRow);

    const gauge = el("div", "gauge");
    if (state.display) {
      const fill = el("div", isAlert(state) ? "gauge-fill alert" : "gauge-fill");
      fill.style.width = `${(state.display.pError * 100).toFixed(1)}%`;
      gauge.append(fill);
      const caption = el("div", "gauge-caption");
      caption.textContent = `p(failure) = ${displayedProbability(state)}`;
      caption.title = `response #${state.display.responseId}, model ${state.display.modelVersion}`;
      gauge.append(caption);
      const mark = el("div", "gauge-threshold");
      mark.style.left = `${(state.alertThreshold * 100).toFixed(1)}%`;
      gauge.append(mark);
      if (state.display.missing.length) {
        const missing = el("div", "missing-features");
        missing.textContent = `marginalized: ${state.display.missing.join(", ")}`;
        gauge.append(missing);
      }
    } else {
      gauge.textContent = "no prediction yet";
    }
    this.root.append(gauge);

    if (state.error) {
      const err = el("div", "console-error");
      err.textContent = state.error;
      this.root.append(err);
    }

    if (state.whatif) {
      const table = el("table", "whatif-table");
      const head = el("tr");
      for (const h of [`${state.whatif.feature} state`, "p(failure)", "delta"]) {
        const th = el("th");
        th.textContent = h;
        head.append(th);
      }
      table.append(head);
      for (const result of state.whatif.results) {
        const tr = el("tr");
        for (const text of [
          result.label,
          result.p_error.toFixed(3),
          (result.delta_vs_base >= 0 ? "+" : "") + result.delta_vs_base.toFixed(3),
        ]) {
          const td = el("td");
          td.textContent = text;
          tr.append(td);
        }
        table.append(tr);
      }
      this.root.append(table);
    }
  }
}

function el(tag: string, className?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}
