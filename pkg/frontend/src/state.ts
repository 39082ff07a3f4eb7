import { ModelInfo, Statement } from "./types";

/**
 * Per-session what-if state: pending do-assignments, factual premises,
 * the query selection and a proposed variable order. Assignments are
 * validated against the served schema; the target stays pinned last in
 * any proposed order.
 */
export class SessionState {
  readonly info: ModelInfo;
  private doSet = new Map<string, number>();
  private factualSet = new Map<string, number>();
  private querySel: Statement | null = null;
  private proposed: string[];

  constructor(info: ModelInfo) {
    this.info = info;
    this.proposed = [...info.variable_order];
  }

  get target(): string {
    return this.info.schema.target;
  }

  private cardinality(variable: string): number {
    const entry = this.info.schema.variables.find(([name]) => name === variable);
    if (!entry) throw new Error(`unknown variable '${variable}'`);
    return entry[1].length;
  }

  private validate(variable: string, code: number): void {
    const card = this.cardinality(variable);
    if (!Number.isInteger(code) || code < 0 || code >= card) {
      throw new Error(`code ${code} out of range for '${variable}'`);
    }
  }

  setDo(variable: string, code: number): void {
    this.validate(variable, code);
    if (this.factualSet.has(variable)) {
      throw new Error(`'${variable}' is already a factual premise`);
    }
    this.doSet.set(variable, code);
  }

  setFactual(variable: string, code: number): void {
    this.validate(variable, code);
    if (this.doSet.has(variable)) {
      throw new Error(`'${variable}' is already an intervention`);
    }
    this.factualSet.set(variable, code);
  }

  clearDo(variable: string): void {
    this.doSet.delete(variable);
  }

  clearFactual(variable: string): void {
    this.factualSet.delete(variable);
  }

  setQuery(variable: string, code: number): void {
    this.validate(variable, code);
    this.querySel = { var: variable, code };
  }

  get interventions(): Statement[] {
    return [...this.doSet].map(([v, c]) => ({ var: v, code: c }));
  }

  get factuals(): Statement[] {
    return [...this.factualSet].map(([v, c]) => ({ var: v, code: c }));
  }

  get query(): Statement {
    if (!this.querySel) throw new Error("no query selected");
    return this.querySel;
  }

  /** The draggable list shown in the reorder panel: features only. */
  get reorderableVariables(): string[] {
    return this.proposed.filter((v) => v !== this.target);
  }

  /** Move a feature within the proposed order; the target cannot move. */
  moveVariable(from: number, to: number): void {
    const features = this.reorderableVariables;
    if (from < 0 || from >= features.length || to < 0 || to >= features.length) {
      throw new Error("reorder index out of range");
    }
    const [item] = features.splice(from, 1);
    features.splice(to, 0, item);
    this.proposed = [...features, this.target];
  }

  /** The full permutation to post to /reorder; always ends with the target. */
  get proposedOrder(): string[] {
    return [...this.reorderableVariables, this.target];
  }
}
