export { ApiError, PcfClient } from "./api";
export { SessionState } from "./state";
export { Workbench } from "./workbench";
export {
  deltaClass,
  renderCounterfactual,
  renderError,
  renderIntervention,
  renderMetricsTable,
  renderReorder,
  renderShapBars,
  renderTornado,
} from "./render";
export * from "./types";
