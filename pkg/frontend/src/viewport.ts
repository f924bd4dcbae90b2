/* World <-> screen transforms for the pan/zoom scatter map. */

import type { Viewport } from "./state.js";
import type { MapPoint } from "./types.js";

export interface ScreenSize {
  width: number;
  height: number;
}

export function fitViewport(points: readonly MapPoint[], screen: ScreenSize, padding = 0.05): Viewport {
  if (points.length === 0) return { centerX: 0, centerY: 0, scale: 1 };
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    if (p.x < minX) minX = p.x;
    if (p.x > maxX) maxX = p.x;
    if (p.y < minY) minY = p.y;
    if (p.y > maxY) maxY = p.y;
  }
  const spanX = Math.max(maxX - minX, 1e-9);
  const spanY = Math.max(maxY - minY, 1e-9);
  const scale = Math.min(
    (screen.width * (1 - 2 * padding)) / spanX,
    (screen.height * (1 - 2 * padding)) / spanY,
  );
  return { centerX: (minX + maxX) / 2, centerY: (minY + maxY) / 2, scale };
}

export function worldToScreen(v: Viewport, screen: ScreenSize, x: number, y: number): [number, number] {
  return [
    screen.width / 2 + (x - v.centerX) * v.scale,
    screen.height / 2 - (y - v.centerY) * v.scale, // world y grows upward
  ];
}

export function screenToWorld(v: Viewport, screen: ScreenSize, sx: number, sy: number): [number, number] {
  return [
    v.centerX + (sx - screen.width / 2) / v.scale,
    v.centerY - (sy - screen.height / 2) / v.scale,
  ];
}

export function pan(v: Viewport, dxPixels: number, dyPixels: number): Viewport {
  return {
    centerX: v.centerX - dxPixels / v.scale,
    centerY: v.centerY + dyPixels / v.scale,
    scale: v.scale,
  };
}

/** Zoom by `factor` keeping the world point under (sx, sy) fixed on screen. */
export function zoomAt(
  v: Viewport,
  screen: ScreenSize,
  sx: number,
  sy: number,
  factor: number,
): Viewport {
  const [wx, wy] = screenToWorld(v, screen, sx, sy);
  const scale = v.scale * factor;
  return {
    centerX: wx - (sx - screen.width / 2) / scale,
    centerY: wy + (sy - screen.height / 2) / scale,
    scale,
  };
}
