import {
  CounterfactualResponse,
  InterveneResponse,
  Metrics,
  ReorderResponse,
  SensitivityRow,
  ShapResponse,
  Statement,
} from "./types";
import { ApiError } from "./api";

// Every numeric cell is rendered with String(x) so the displayed text is
// exactly the JSON value the service returned.
function num(x: number | null): string {
  return x === null ? "n/a" : String(x);
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function statement(s: Statement): string {
  return `${esc(s.var)}=${s.code}`;
}

/** Increased probability renders red, decreased green. */
export function deltaClass(delta: number): string {
  if (delta > 0) return "delta-increase";
  if (delta < 0) return "delta-decrease";
  return "delta-none";
}

export function renderIntervention(
  doSet: Statement[],
  query: Statement,
  resp: InterveneResponse,
): string {
  const doText = doSet.map(statement).join(", ");
  return [
    `<section class="panel intervention">`,
    `<h2>do(${doText}) &rarr; ${statement(query)}</h2>`,
    `<dl>`,
    `<dt>baseline</dt><dd class="baseline">${num(resp.baseline)}</dd>`,
    `<dt>intervened</dt><dd class="intervened">${num(resp.intervened)}</dd>`,
    `<dt>delta</dt><dd class="${deltaClass(resp.delta)}">${num(resp.delta)}</dd>`,
    `</dl>`,
    `</section>`,
  ].join("\n");
}

export function renderCounterfactual(
  factual: Statement[],
  intervene: Statement,
  query: Statement,
  resp: CounterfactualResponse,
  factualProbability: number | null = null,
): string {
  const premise = factual.map(statement).join(", ");
  const lines = [
    `<section class="panel counterfactual">`,
    `<h2>P(${statement(query)} under do(${statement(intervene)}) | ${premise})</h2>`,
    `<dl>`,
    `<dt>counterfactual</dt><dd class="cf-value">${num(resp.probability)}</dd>`,
  ];
  if (factualProbability !== null) {
    lines.push(`<dt>factual</dt><dd class="factual-value">${num(factualProbability)}</dd>`);
  }
  lines.push(`</dl>`, `</section>`);
  return lines.join("\n");
}

export function renderMetricsTable(before: Metrics, after: Metrics): string {
  const names = ["accuracy", "specificity", "sensitivity", "auc_roc"];
  const rows = names.map((name) => {
    const b = before[name] ?? null;
    const a = after[name] ?? null;
    return `<tr><th>${name}</th><td class="before">${num(b)}</td><td class="after">${num(a)}</td></tr>`;
  });
  return [
    `<table class="metrics">`,
    `<thead><tr><th>metric</th><th>before</th><th>after</th></tr></thead>`,
    `<tbody>`,
    ...rows,
    `</tbody>`,
    `</table>`,
  ].join("\n");
}

export function renderReorder(resp: ReorderResponse): string {
  return [
    `<section class="panel reorder">`,
    `<h2>retrained with order ${resp.variable_order.map(esc).join(", ")} (v${resp.version})</h2>`,
    renderMetricsTable(resp.metrics_before, resp.metrics_after),
    `</section>`,
  ].join("\n");
}

/** Tornado chart: one bar per parameter, widest swing on top. */
export function renderTornado(ranking: SensitivityRow[]): string {
  const spans = ranking.map((r) => Math.abs(r.t_at_1 - r.t_at_0));
  const widest = Math.max(...spans, 1e-12);
  const bars = ranking.map((r, i) => {
    const width = (100 * spans[i]) / widest;
    const label = `${esc(r.node)}[${r.config},${r.state}]`;
    return [
      `<div class="bar ${esc(r.direction)}" style="width:${width.toFixed(2)}%">`,
      `<span class="label">${label}</span>`,
      `<span class="t0">${num(r.t_at_0)}</span>`,
      `<span class="t1">${num(r.t_at_1)}</span>`,
      `</div>`,
    ].join("");
  });
  return [`<section class="panel tornado">`, ...bars, `</section>`].join("\n");
}

export function renderShapBars(resp: ShapResponse): string {
  const widest = Math.max(...resp.phi.map(Math.abs), 1e-12);
  const bars = resp.features.map((feature, i) => {
    const phi = resp.phi[i];
    const width = (100 * Math.abs(phi)) / widest;
    return [
      `<div class="bar ${phi >= 0 ? "positive" : "negative"}" style="width:${width.toFixed(2)}%">`,
      `<span class="label">${esc(feature)}</span>`,
      `<span class="phi">${num(phi)}</span>`,
      `</div>`,
    ].join("");
  });
  return [
    `<section class="panel shap">`,
    `<p>base <span class="base">${num(resp.base_value)}</span>`,
    ` prediction <span class="prediction">${num(resp.prediction)}</span></p>`,
    ...bars,
    `</section>`,
  ].join("\n");
}

/** Service failures are shown verbatim, with a retry affordance. */
export function renderError(error: ApiError): string {
  return [
    `<section class="panel error">`,
    `<p class="status">service error ${error.status}</p>`,
    `<p class="message">${esc(error.message)}</p>`,
    `<button class="retry">Retry</button>`,
    `</section>`,
  ].join("\n");
}
