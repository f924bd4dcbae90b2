/* Application shell: loads summary + map, wires the filter panel, scatter
 * map, query panel, and overlay toggles together, and keeps ViewState in the
 * URL fragment so a reload restores the session. */

import { AtlasClient, ServiceError } from "./api.js";
import { FilterPanel } from "./filters.js";
import { QueryPanel } from "./querypanel.js";
import {
  CanvasSurface,
  ScatterRenderer,
  type DrawSurface,
  type Overlays,
  type RenderStats,
} from "./scatter.js";
import {
  DEFAULT_STATE,
  cloneState,
  decodeState,
  encodeState,
  sanitizeState,
  type ViewState,
} from "./state.js";
import { fitViewport, pan, screenToWorld, zoomAt, type ScreenSize } from "./viewport.js";
import type { HoleRecord, MapPoint, QueryHit, SummaryResponse } from "./types.js";

const MAP_FIELDS = ["dataset", "label", "fst", "year", "body_region", "modality"];

export interface AppElements {
  canvas: HTMLCanvasElement;
  filterRoot: HTMLElement;
  queryRoot: HTMLElement;
  banner: HTMLElement;
  status: HTMLElement;
  termsRoot: HTMLElement;
  holesToggle: HTMLInputElement;
  densityToggle: HTMLInputElement;
  kInput: HTMLInputElement;
  colorSelect: HTMLSelectElement;
  retryButton: HTMLButtonElement;
}

export class AtlasApp {
  state: ViewState = cloneState(DEFAULT_STATE);
  points: MapPoint[] = [];
  summary: SummaryResponse | null = null;
  lastRender: RenderStats | null = null;
  private overlays: Overlays = {};
  private renderer: ScatterRenderer | null = null;
  private filterPanel: FilterPanel | null = null;
  private queryPanel: QueryPanel;
  private pointIndex = new Map<string, MapPoint>();

  constructor(
    private readonly client: AtlasClient,
    private readonly el: AppElements,
    private readonly loc: { hash: string } = window.location,
    private readonly surface: DrawSurface | null = null, // test seam: jsdom has no 2D context
  ) {
    this.queryPanel = new QueryPanel(el.queryRoot, client, (hit) => this.selectResult(hit));
    el.retryButton.addEventListener("click", () => void this.start());
  }

  async start(): Promise<void> {
    this.el.banner.hidden = true;
    try {
      this.summary = await this.client.summary();
      const map = await this.client.map(MAP_FIELDS);
      this.points = map.points;
    } catch (error) {
      this.el.banner.hidden = false;
      this.el.banner.querySelector(".banner-text")!.textContent =
        `Atlas service unreachable: ${error instanceof Error ? error.message : String(error)}`;
      return;
    }
    this.pointIndex = new Map(this.points.map((p) => [p.id, p]));
    this.state = sanitizeState(decodeState(this.loc.hash), this.summary);

    const screen: ScreenSize = { width: this.el.canvas.width, height: this.el.canvas.height };
    let surface = this.surface;
    if (!surface) {
      const ctx = this.el.canvas.getContext("2d");
      if (ctx) surface = new CanvasSurface(ctx);
    }
    if (surface) this.renderer = new ScatterRenderer(surface, screen);

    this.filterPanel = new FilterPanel(this.el.filterRoot, this.summary, (change) => {
      if (change.values.length) this.state.filters[change.field] = change.values;
      else delete this.state.filters[change.field];
      this.afterStateChange();
      void this.queryPanel.run(this.state);
    });
    this.filterPanel.render();
    this.filterPanel.applyState(this.state.filters);

    this.populateColorChoices();
    this.bindControls();
    this.bindCanvas(screen);
    await this.loadOverlays();
    this.afterStateChange();
    if (this.state.selectedId) await this.queryPanel.run(this.state);
  }

  private populateColorChoices(): void {
    this.el.colorSelect.textContent = "";
    for (const field of MAP_FIELDS) {
      const option = document.createElement("option");
      option.value = field;
      option.textContent = field;
      this.el.colorSelect.appendChild(option);
    }
    this.el.colorSelect.value = this.state.colorField;
  }

  private bindControls(): void {
    this.el.kInput.value = String(this.state.k);
    this.el.kInput.addEventListener("change", () => {
      const k = Math.max(1, Math.floor(Number(this.el.kInput.value) || DEFAULT_STATE.k));
      this.el.kInput.value = String(k);
      this.state.k = k;
      this.afterStateChange();
      void this.queryPanel.run(this.state);
    });
    this.el.colorSelect.addEventListener("change", () => {
      this.state.colorField = this.el.colorSelect.value;
      this.afterStateChange();
    });
    this.el.holesToggle.checked = this.state.showHoles;
    this.el.holesToggle.addEventListener("change", () => {
      this.state.showHoles = this.el.holesToggle.checked;
      this.afterStateChange();
      this.renderTerms();
    });
    this.el.densityToggle.checked = this.state.showDensity;
    this.el.densityToggle.addEventListener("change", () => {
      this.state.showDensity = this.el.densityToggle.checked;
      this.afterStateChange();
    });
  }

  private bindCanvas(screen: ScreenSize): void {
    let dragging = false;
    let lastX = 0;
    let lastY = 0;
    this.el.canvas.addEventListener("mousedown", (event) => {
      dragging = true;
      lastX = event.offsetX;
      lastY = event.offsetY;
    });
    this.el.canvas.addEventListener("mousemove", (event) => {
      if (!dragging) return;
      const viewport = this.state.viewport ?? fitViewport(this.points, screen);
      this.state.viewport = pan(viewport, event.offsetX - lastX, event.offsetY - lastY);
      lastX = event.offsetX;
      lastY = event.offsetY;
      this.afterStateChange();
    });
    window.addEventListener("mouseup", () => {
      dragging = false;
    });
    this.el.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      const viewport = this.state.viewport ?? fitViewport(this.points, screen);
      const factor = event.deltaY < 0 ? 1.2 : 1 / 1.2;
      this.state.viewport = zoomAt(viewport, screen, event.offsetX, event.offsetY, factor);
      this.afterStateChange();
    });
    this.el.canvas.addEventListener("click", (event) => {
      const hit = this.nearestPoint(screen, event.offsetX, event.offsetY);
      if (hit) void this.select(hit.id);
    });
  }

  private nearestPoint(screen: ScreenSize, sx: number, sy: number): MapPoint | null {
    const viewport = this.state.viewport ?? fitViewport(this.points, screen);
    const [wx, wy] = screenToWorld(viewport, screen, sx, sy);
    const maxWorld = 8 / viewport.scale; // 8-pixel pick radius
    let best: MapPoint | null = null;
    let bestD = maxWorld * maxWorld;
    for (const p of this.points) {
      const d = (p.x - wx) ** 2 + (p.y - wy) ** 2;
      if (d < bestD) {
        bestD = d;
        best = p;
      }
    }
    return best;
  }

  private async loadOverlays(): Promise<void> {
    this.overlays = {
      holePosition: (hole: HoleRecord) => this.holeMapPosition(hole),
    };
    try {
      const holes = await this.client.holesReport();
      this.overlays.holes = holes.holes;
      this.el.holesToggle.disabled = false;
    } catch (error) {
      if (error instanceof ServiceError && error.status === 404) {
        this.el.holesToggle.disabled = true;
        this.el.holesToggle.title = "no holes report cached on the service";
      }
    }
    try {
      const density = await this.client.densityReport();
      this.overlays.sparseIds = new Set(density.sparse_ids);
      this.overlays.denseIds = new Set(density.dense_ids);
      this.el.densityToggle.disabled = false;
    } catch (error) {
      if (error instanceof ServiceError && error.status === 404) {
        this.el.densityToggle.disabled = true;
        this.el.densityToggle.title = "no density report cached on the service";
      }
    }
  }

  /** Place a hole at the mean map position of its boundary samples; the map
   * projection of the latent center is not served, and recomputing it client
   * side would mean doing math on embeddings. */
  private holeMapPosition(hole: HoleRecord): [number, number] | null {
    let x = 0;
    let y = 0;
    let n = 0;
    for (const id of hole.boundary_ids) {
      const p = this.pointIndex.get(id);
      if (!p) continue;
      x += p.x;
      y += p.y;
      n += 1;
    }
    return n ? [x / n, y / n] : null;
  }

  async select(id: string): Promise<void> {
    this.state.selectedId = id;
    this.afterStateChange();
    await this.queryPanel.run(this.state);
  }

  /** Clicking a result recenters the map on it and makes it the next query. */
  private selectResult(hit: QueryHit): void {
    const p = this.pointIndex.get(hit.id);
    if (p && this.state.viewport) {
      this.state.viewport = { ...this.state.viewport, centerX: p.x, centerY: p.y };
    }
    void this.select(hit.id);
  }

  private renderTerms(): void {
    this.el.termsRoot.textContent = "";
    if (!this.state.showHoles || !this.overlays.holes?.length) return;
    const hole = this.overlays.holes[0]!;
    const heading = document.createElement("h3");
    heading.textContent = `hole #${hole.rank} boundary terms`;
    this.el.termsRoot.appendChild(heading);
    const list = document.createElement("ol");
    for (const [term, count] of hole.boundary_terms ?? []) {
      const row = document.createElement("li");
      row.textContent = `${term} (${count})`;
      list.appendChild(row);
    }
    this.el.termsRoot.appendChild(list);
  }

  afterStateChange(): void {
    this.loc.hash = encodeState(this.state);
    if (this.renderer) {
      this.lastRender = this.renderer.render(this.points, this.state, this.overlays);
    }
    this.renderStatus();
  }

  private renderStatus(): void {
    if (!this.summary) return;
    const filtered = Object.keys(this.state.filters).length;
    const parts = [`${this.summary.n_samples} samples`];
    if (this.lastRender && this.lastRender.stride > 1) {
      parts.push(`drawing every ${this.lastRender.stride}th point`);
    }
    if (filtered) parts.push(`${filtered} filter${filtered > 1 ? "s" : ""} active`);
    if (this.state.selectedId) parts.push(`selected ${this.state.selectedId}`);
    this.el.status.textContent = parts.join(" · ");
  }
}
