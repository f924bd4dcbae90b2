import { AtlasClient } from "./api.js";
import { AtlasApp, type AppElements } from "./app.js";

function grab<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const serviceUrl =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8700";

const elements: AppElements = {
  canvas: grab<HTMLCanvasElement>("map-canvas"),
  filterRoot: grab("filter-panel"),
  queryRoot: grab("query-panel"),
  banner: grab("error-banner"),
  status: grab("status-line"),
  termsRoot: grab("terms-panel"),
  holesToggle: grab<HTMLInputElement>("toggle-holes"),
  densityToggle: grab<HTMLInputElement>("toggle-density"),
  kInput: grab<HTMLInputElement>("k-input"),
  colorSelect: grab<HTMLSelectElement>("color-select"),
  retryButton: grab<HTMLButtonElement>("retry-button"),
};

const app = new AtlasApp(new AtlasClient(serviceUrl), elements);
void app.start();
