import {
  CounterfactualResponse,
  InterveneResponse,
  ModelInfo,
  PredictResponse,
  ReorderResponse,
  Reply,
  SensitivityResponse,
  ShapResponse,
  Statement,
} from "./types";

/** A service error, carrying the HTTP status and the server's message verbatim. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the service JSON API. All probabilities displayed
 * by the workbench come from these replies; nothing is recomputed locally.
 */
export class PcfClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<Reply<T>> {
    const resp = await this.fetchFn(this.base + path, init);
    const version = resp.headers.get("X-Model-Version") ?? "";
    let body: unknown;
    try {
      body = await resp.json();
    } catch {
      body = undefined;
    }
    if (!resp.ok) {
      const detail =
        body && typeof body === "object" && "error" in body
          ? String((body as { error: unknown }).error)
          : `request failed with status ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return { body: body as T, version };
  }

  private post<T>(path: string, payload: unknown): Promise<Reply<T>> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  model(): Promise<Reply<ModelInfo>> {
    return this.request<ModelInfo>("/model");
  }

  predict(features: Record<string, number>): Promise<Reply<PredictResponse>> {
    return this.post<PredictResponse>("/predict", { features });
  }

  intervene(doSet: Statement[], query: Statement): Promise<Reply<InterveneResponse>> {
    return this.post<InterveneResponse>("/intervene", { do: doSet, query });
  }

  counterfactual(
    factual: Statement[],
    intervene: Statement,
    query: Statement,
  ): Promise<Reply<CounterfactualResponse>> {
    return this.post<CounterfactualResponse>("/counterfactual", {
      factual,
      intervene,
      query,
    });
  }

  sensitivity(target: string, evidence: string[] = []): Promise<Reply<SensitivityResponse>> {
    const params = new URLSearchParams([["target", target]]);
    for (const item of evidence) params.append("evidence", item);
    return this.request<SensitivityResponse>(`/sensitivity?${params.toString()}`);
  }

  shap(features: Record<string, number>): Promise<Reply<ShapResponse>> {
    return this.post<ShapResponse>("/shap", { features });
  }

  reorder(variableOrder: string[]): Promise<Reply<ReorderResponse>> {
    return this.post<ReorderResponse>("/reorder", { variable_order: variableOrder });
  }
}
