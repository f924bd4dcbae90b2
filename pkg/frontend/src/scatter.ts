/* Canvas scatter renderer: points colored by a metadata field, filtered-out
 * points dimmed, hole centers as persistence-scaled ring markers, density
 * extremes highlighted. Drawing goes through a minimal surface interface so
 * tests can record calls without a real 2D context. */

import { decimationStride } from "./decimate.js";
import type { ViewState, Viewport } from "./state.js";
import { fitViewport, worldToScreen, type ScreenSize } from "./viewport.js";
import type { HoleRecord, MapPoint } from "./types.js";

export interface DrawSurface {
  clear(width: number, height: number): void;
  circle(x: number, y: number, radius: number, color: string, alpha: number): void;
  ring(x: number, y: number, radius: number, color: string, lineWidth: number): void;
}

export class CanvasSurface implements DrawSurface {
  constructor(private readonly ctx: CanvasRenderingContext2D) {}

  clear(width: number, height: number): void {
    this.ctx.clearRect(0, 0, width, height);
  }

  circle(x: number, y: number, radius: number, color: string, alpha: number): void {
    this.ctx.globalAlpha = alpha;
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.arc(x, y, radius, 0, 2 * Math.PI);
    this.ctx.fill();
    this.ctx.globalAlpha = 1;
  }

  ring(x: number, y: number, radius: number, color: string, lineWidth: number): void {
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = lineWidth;
    this.ctx.beginPath();
    this.ctx.arc(x, y, radius, 0, 2 * Math.PI);
    this.ctx.stroke();
  }
}

const PALETTE = [
  "#4269d0", "#efb118", "#ff725c", "#6cc5b0", "#3ca951",
  "#ff8ab7", "#a463f2", "#97bbf5", "#9c6b4e", "#9498a0",
];
const MISSING_COLOR = "#c8c8c8";
const DIMMED_ALPHA = 0.12;
const FULL_ALPHA = 0.85;
const SELECTED_COLOR = "#000000";
const SPARSE_COLOR = "#d62728";
const DENSE_COLOR = "#7a14c9";
const HOLE_COLOR = "#e45756";

export interface RenderStats {
  total: number;
  drawn: number;
  dimmed: number;
  highlighted: number;
  holeMarkers: number;
  stride: number;
}

export function colorForValue(value: string | number | undefined, legend: Map<string, string>): string {
  if (value === undefined || value === null) return MISSING_COLOR;
  const key = String(value);
  let color = legend.get(key);
  if (color === undefined) {
    color = PALETTE[legend.size % PALETTE.length]!;
    legend.set(key, color);
  }
  return color;
}

export function passesFilters(point: MapPoint, filters: Record<string, string[]>): boolean {
  for (const [field, allowed] of Object.entries(filters)) {
    const value = point[field];
    if (value === undefined || !allowed.includes(String(value))) return false;
  }
  return true;
}

export interface Overlays {
  holes?: HoleRecord[];
  sparseIds?: Set<string>;
  denseIds?: Set<string>;
  /** projects a hole's latent center into map coordinates; service map space by default */
  holePosition?: (hole: HoleRecord) => [number, number] | null;
}

export class ScatterRenderer {
  readonly legend = new Map<string, string>();

  constructor(
    private readonly surface: DrawSurface,
    private readonly screen: ScreenSize,
    private readonly pointBudget?: number,
  ) {}

  render(points: readonly MapPoint[], state: ViewState, overlays: Overlays = {}): RenderStats {
    const viewport: Viewport = state.viewport ?? fitViewport(points, this.screen);
    this.surface.clear(this.screen.width, this.screen.height);
    this.legend.clear();
    const stride = decimationStride(points.length, this.pointBudget);
    const hasFilters = Object.keys(state.filters).length > 0;
    let drawn = 0;
    let dimmed = 0;
    let highlighted = 0;

    for (let i = 0; i < points.length; i += stride) {
      const p = points[i]!;
      const [sx, sy] = worldToScreen(viewport, this.screen, p.x, p.y);
      const inFilter = !hasFilters || passesFilters(p, state.filters);
      const color = colorForValue(p[state.colorField], this.legend);
      this.surface.circle(sx, sy, 2.2, color, inFilter ? FULL_ALPHA : DIMMED_ALPHA);
      drawn += 1;
      if (!inFilter) dimmed += 1;
      if (state.showDensity) {
        if (overlays.sparseIds?.has(p.id)) {
          this.surface.ring(sx, sy, 4.5, SPARSE_COLOR, 1.5);
          highlighted += 1;
        } else if (overlays.denseIds?.has(p.id)) {
          this.surface.ring(sx, sy, 4.5, DENSE_COLOR, 1.5);
          highlighted += 1;
        }
      }
      if (p.id === state.selectedId) {
        this.surface.ring(sx, sy, 6, SELECTED_COLOR, 2);
      }
    }

    let holeMarkers = 0;
    if (state.showHoles && overlays.holes) {
      const persistences = overlays.holes
        .map((h) => h.persistence)
        .filter((v): v is number => v !== null && Number.isFinite(v));
      const maxPersistence = persistences.length ? Math.max(...persistences) : 1;
      for (const hole of overlays.holes) {
        const pos = overlays.holePosition?.(hole);
        if (!pos) continue;
        const [sx, sy] = worldToScreen(viewport, this.screen, pos[0], pos[1]);
        const weight = hole.persistence !== null ? hole.persistence / maxPersistence : 1;
        this.surface.ring(sx, sy, 8 + 14 * weight, HOLE_COLOR, 2.5);
        holeMarkers += 1;
      }
    }
    return { total: points.length, drawn, dimmed, highlighted, holeMarkers, stride };
  }
}
