// Recorded-response contract: every number the panels display must be the
// exact value a real service instance returned, byte for byte.

import { describe, expect, it } from "vitest";
import { ApiError } from "../src/api";
import {
  deltaClass,
  renderCounterfactual,
  renderError,
  renderIntervention,
  renderReorder,
  renderShapBars,
  renderTornado,
} from "../src/render";
import {
  CounterfactualResponse,
  InterveneResponse,
  ReorderResponse,
  SensitivityResponse,
  ShapResponse,
} from "../src/types";
import { fixture } from "./fixtures";

describe("intervention panel", () => {
  it("shows the served baseline, intervened and delta verbatim", () => {
    const rec = fixture<InterveneResponse>("intervene");
    const html = renderIntervention(
      [{ var: "b", code: 1 }],
      { var: "c", code: 1 },
      rec.body,
    );
    expect(html).toContain(`>${String(rec.body.baseline)}<`);
    expect(html).toContain(`>${String(rec.body.intervened)}<`);
    expect(html).toContain(`>${String(rec.body.delta)}<`);
  });

  it("colors an increase red and a decrease green", () => {
    const rec = fixture<InterveneResponse>("intervene");
    expect(rec.body.delta).toBeGreaterThan(0);
    const html = renderIntervention(
      [{ var: "b", code: 1 }],
      { var: "c", code: 1 },
      rec.body,
    );
    expect(html).toContain("delta-increase");
    expect(deltaClass(-0.2)).toBe("delta-decrease");
    expect(deltaClass(0)).toBe("delta-none");
  });

  it("forcing the query itself displays probability 1", () => {
    const rec = fixture<InterveneResponse>("intervene_certain");
    expect(rec.body.intervened).toBeCloseTo(1.0, 9);
    const html = renderIntervention(
      [{ var: "c", code: 1 }],
      { var: "c", code: 1 },
      rec.body,
    );
    expect(html).toContain(`>${String(rec.body.intervened)}<`);
  });
});

describe("counterfactual panel", () => {
  it("shows the served probability verbatim", () => {
    const rec = fixture<CounterfactualResponse>("counterfactual");
    const html = renderCounterfactual(
      [{ var: "b", code: 0 }],
      { var: "b", code: 1 },
      { var: "c", code: 1 },
      rec.body,
    );
    expect(html).toContain(`>${String(rec.body.probability)}<`);
    expect(html).not.toContain("factual-value");
  });

  it("shows the factual probability only when supplied", () => {
    const rec = fixture<CounterfactualResponse>("counterfactual");
    const html = renderCounterfactual(
      [{ var: "b", code: 0 }],
      { var: "b", code: 1 },
      { var: "c", code: 1 },
      rec.body,
      0.25,
    );
    expect(html).toContain(`class="factual-value">0.25<`);
  });
});

describe("reorder panel", () => {
  it("identity reorder renders equal before/after metrics", () => {
    const rec = fixture<ReorderResponse>("reorder_identity");
    expect(rec.body.metrics_after).toEqual(rec.body.metrics_before);
    const html = renderReorder(rec.body);
    for (const name of ["accuracy", "specificity", "sensitivity", "auc_roc"]) {
      const value = rec.body.metrics_before[name];
      const text = value === null ? "n/a" : String(value);
      expect(html).toContain(`class="before">${text}<`);
      expect(html).toContain(`class="after">${text}<`);
    }
    expect(html).toContain(`(v${rec.body.version})`);
  });
});

describe("sensitivity tornado", () => {
  it("renders the served endpoints verbatim, widest bar first", () => {
    const rec = fixture<SensitivityResponse>("sensitivity");
    const html = renderTornado(rec.body.ranking);
    for (const row of rec.body.ranking) {
      expect(html).toContain(`>${String(row.t_at_0)}<`);
      expect(html).toContain(`>${String(row.t_at_1)}<`);
      expect(html).toContain(`${row.node}[${row.config},${row.state}]`);
    }
    expect(html).toContain('width:100.00%');
  });
});

describe("shap bars", () => {
  it("renders every attribution, the base and the prediction verbatim", () => {
    const rec = fixture<ShapResponse>("shap");
    const html = renderShapBars(rec.body);
    for (let i = 0; i < rec.body.features.length; i++) {
      expect(html).toContain(rec.body.features[i]);
      expect(html).toContain(`>${String(rec.body.phi[i])}<`);
    }
    expect(html).toContain(`class="base">${String(rec.body.base_value)}<`);
    expect(html).toContain(`class="prediction">${String(rec.body.prediction)}<`);
  });
});

describe("error panel", () => {
  it("surfaces recorded service errors verbatim with a retry button", () => {
    for (const name of ["error_bad_code", "error_zero_factual"]) {
      const rec = fixture<{ error: string }>(name);
      const html = renderError(new ApiError(rec.status, rec.body.error));
      expect(html).toContain(`service error ${rec.status}`);
      expect(html).toContain(rec.body.error);
      expect(html).toContain(`<button class="retry">`);
    }
  });
});
