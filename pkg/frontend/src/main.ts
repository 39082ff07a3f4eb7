// Browser entry: wires the workbench panels into the page. All numbers on
// screen come straight from service responses.

import { PcfClient } from "./api";
import { Workbench } from "./workbench";

const SERVICE_URL = new URLSearchParams(location.search).get("service") ??
  "http://127.0.0.1:8000";

function panel(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

async function refresh(bench: Workbench): Promise<void> {
  try {
    panel("intervention").innerHTML = await bench.interventionPanel();
  } catch {
    panel("intervention").innerHTML = "<p>select an intervention and a query</p>";
  }
  try {
    panel("counterfactual").innerHTML = await bench.counterfactualPanel();
  } catch {
    panel("counterfactual").innerHTML = "<p>select a factual premise</p>";
  }
  panel("sensitivity").innerHTML = await bench.sensitivityChart(1);
}

async function boot(): Promise<void> {
  const bench = new Workbench(new PcfClient(SERVICE_URL));
  const state = await bench.load();

  const controls = panel("controls");
  for (const [name, categories] of state.info.schema.variables) {
    if (name === state.target) continue;
    const select = document.createElement("select");
    select.innerHTML =
      `<option value="">${name}</option>` +
      categories.map((c, i) => `<option value="${i}">${name}=${c}</option>`).join("");
    select.addEventListener("change", () => {
      if (select.value === "") state.clearDo(name);
      else state.setDo(name, Number(select.value));
      void refresh(bench);
    });
    controls.appendChild(select);
  }

  const targetCats = state.info.schema.variables.find(
    ([n]) => n === state.target,
  )![1];
  state.setQuery(state.target, targetCats.length - 1);

  const retrain = panel("retrain") as HTMLButtonElement;
  retrain.addEventListener("click", async () => {
    retrain.disabled = true;
    try {
      panel("reorder").innerHTML = await bench.reorderPanel();
    } finally {
      retrain.disabled = false;
    }
  });
}

void boot();
