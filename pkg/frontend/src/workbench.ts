import { ApiError, PcfClient } from "./api";
import {
  renderCounterfactual,
  renderError,
  renderIntervention,
  renderReorder,
  renderShapBars,
  renderTornado,
} from "./render";
import { SessionState } from "./state";

/**
 * Orchestrates the what-if panels. Each method issues the corresponding
 * service call and returns the rendered panel HTML; service failures
 * render as-is instead of throwing so a panel can always show something.
 */
export class Workbench {
  readonly client: PcfClient;
  private stateValue: SessionState | null = null;
  private reorderInFlight = false;

  constructor(client: PcfClient) {
    this.client = client;
  }

  get state(): SessionState {
    if (!this.stateValue) throw new Error("model not loaded");
    return this.stateValue;
  }

  get reorderBusy(): boolean {
    return this.reorderInFlight;
  }

  async load(): Promise<SessionState> {
    const reply = await this.client.model();
    this.stateValue = new SessionState(reply.body);
    return this.stateValue;
  }

  async interventionPanel(): Promise<string> {
    const doSet = this.state.interventions;
    const query = this.state.query;
    try {
      const reply = await this.client.intervene(doSet, query);
      return renderIntervention(doSet, query, reply.body);
    } catch (err) {
      if (err instanceof ApiError) return renderError(err);
      throw err;
    }
  }

  async counterfactualPanel(): Promise<string> {
    const factual = this.state.factuals;
    const [intervention] = this.state.interventions;
    if (!intervention) throw new Error("no intervention selected");
    const query = this.state.query;
    try {
      const reply = await this.client.counterfactual(factual, intervention, query);
      // The factual-world probability is only available from the service
      // when the premises pin down every feature.
      let factualProbability: number | null = null;
      const features = this.state.info.variable_order.filter(
        (v) => v !== this.state.target,
      );
      if (
        query.var === this.state.target &&
        features.every((f) => factual.some((s) => s.var === f))
      ) {
        const coded: Record<string, number> = {};
        for (const s of factual) coded[s.var] = s.code;
        const predicted = await this.client.predict(coded);
        factualProbability = predicted.body.probability;
      }
      return renderCounterfactual(
        factual,
        intervention,
        query,
        reply.body,
        factualProbability,
      );
    } catch (err) {
      if (err instanceof ApiError) return renderError(err);
      throw err;
    }
  }

  /** Posts the proposed order; the retrain button stays disabled while
   * a reorder is in flight. */
  async reorderPanel(): Promise<string> {
    if (this.reorderInFlight) throw new Error("a reorder is already in flight");
    this.reorderInFlight = true;
    try {
      const reply = await this.client.reorder(this.state.proposedOrder);
      return renderReorder(reply.body);
    } catch (err) {
      if (err instanceof ApiError) return renderError(err);
      throw err;
    } finally {
      this.reorderInFlight = false;
    }
  }

  async sensitivityChart(targetState: number): Promise<string> {
    const target = `${this.state.target}=${targetState}`;
    try {
      const reply = await this.client.sensitivity(target);
      return renderTornado(reply.body.ranking);
    } catch (err) {
      if (err instanceof ApiError) return renderError(err);
      throw err;
    }
  }

  async shapChart(instance: Record<string, number>): Promise<string> {
    try {
      const reply = await this.client.shap(instance);
      return renderShapBars(reply.body);
    } catch (err) {
      if (err instanceof ApiError) return renderError(err);
      throw err;
    }
  }
}
