/* ViewState and its URL-fragment round-trip: reloading the page restores
 * filters, selection, k, overlays, and viewport. */

import type { SummaryResponse } from "./types.js";

export interface Viewport {
  centerX: number;
  centerY: number;
  /** screen pixels per world unit */
  scale: number;
}

export interface ViewState {
  filters: Record<string, string[]>;
  selectedId: string | null;
  k: number;
  colorField: string;
  showHoles: boolean;
  showDensity: boolean;
  viewport: Viewport | null;
}

export const DEFAULT_STATE: ViewState = {
  filters: {},
  selectedId: null,
  k: 10,
  colorField: "dataset",
  showHoles: false,
  showDensity: false,
  viewport: null,
};

export function cloneState(state: ViewState): ViewState {
  return {
    ...state,
    filters: Object.fromEntries(Object.entries(state.filters).map(([f, v]) => [f, [...v]])),
    viewport: state.viewport ? { ...state.viewport } : null,
  };
}

/** Drop filters on fields the service does not advertise, and clamp k >= 1. */
export function sanitizeState(state: ViewState, summary: SummaryResponse): ViewState {
  const out = cloneState(state);
  out.k = Math.max(1, Math.floor(out.k));
  for (const field of Object.keys(out.filters)) {
    if (!(field in summary.fields) || out.filters[field]!.length === 0) {
      delete out.filters[field];
    }
  }
  return out;
}

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  for (const [field, values] of Object.entries(state.filters)) {
    if (values.length) params.set(`f.${field}`, values.join("|"));
  }
  if (state.selectedId !== null) params.set("sel", state.selectedId);
  if (state.k !== DEFAULT_STATE.k) params.set("k", String(state.k));
  if (state.colorField !== DEFAULT_STATE.colorField) params.set("color", state.colorField);
  if (state.showHoles) params.set("holes", "1");
  if (state.showDensity) params.set("density", "1");
  if (state.viewport) {
    const { centerX, centerY, scale } = state.viewport;
    params.set("view", [centerX, centerY, scale].map((v) => v.toPrecision(8)).join(","));
  }
  return params.toString();
}

export function decodeState(fragment: string): ViewState {
  const out = cloneState(DEFAULT_STATE);
  const params = new URLSearchParams(fragment.replace(/^#/, ""));
  for (const [key, value] of params.entries()) {
    if (key.startsWith("f.")) {
      const values = value.split("|").filter((v) => v.length > 0);
      if (values.length) out.filters[key.slice(2)] = values;
    }
  }
  const sel = params.get("sel");
  if (sel !== null) out.selectedId = sel;
  const k = Number(params.get("k"));
  if (Number.isFinite(k) && k >= 1) out.k = Math.floor(k);
  const color = params.get("color");
  if (color) out.colorField = color;
  out.showHoles = params.get("holes") === "1";
  out.showDensity = params.get("density") === "1";
  const view = params.get("view");
  if (view) {
    const parts = view.split(",").map(Number);
    if (parts.length === 3 && parts.every((v) => Number.isFinite(v)) && parts[2]! > 0) {
      out.viewport = { centerX: parts[0]!, centerY: parts[1]!, scale: parts[2]! };
    }
  }
  return out;
}

export function writeStateToLocation(state: ViewState, loc: { hash: string } = window.location): void {
  loc.hash = encodeState(state);
}

export function readStateFromLocation(loc: { hash: string } = window.location): ViewState {
  return decodeState(loc.hash);
}
