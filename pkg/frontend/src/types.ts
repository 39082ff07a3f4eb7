// Wire types for the model service JSON API.

export interface Statement {
  var: string;
  code: number;
}

export type SchemaVariables = [string, string[]][];

export interface ModelInfo {
  schema: { variables: SchemaVariables; target: string };
  variable_order: string[];
  k: number;
  tau: number;
  pruning_threshold: number;
  seed: number;
  training: { rows: number; positives: number } | null;
  version: number;
}

export interface PredictResponse {
  probability: number;
  class: number;
}

export interface InterveneResponse {
  baseline: number;
  intervened: number;
  delta: number;
}

export interface CounterfactualResponse {
  probability: number;
}

export interface SensitivityRow {
  node: string;
  config: number;
  state: number;
  t_at_0: number;
  t_at_1: number;
  derivative: number;
  direction: string;
}

export interface SensitivityResponse {
  ranking: SensitivityRow[];
}

export interface ShapResponse {
  features: string[];
  phi: number[];
  base_value: number;
  prediction: number;
}

export type Metrics = Record<string, number | null>;

export interface ReorderResponse {
  metrics_before: Metrics;
  metrics_after: Metrics;
  variable_order: string[];
  version: number;
}

/** A parsed service reply plus the model version header it carried. */
export interface Reply<T> {
  body: T;
  version: string;
}
