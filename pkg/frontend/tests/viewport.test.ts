import { describe, expect, it } from "vitest";

import { fitViewport, pan, screenToWorld, worldToScreen, zoomAt } from "../src/viewport.js";
import type { MapPoint } from "../src/types.js";

const SCREEN = { width: 800, height: 600 };

const POINTS: MapPoint[] = [
  { id: "a", x: -2, y: -1 },
  { id: "b", x: 2, y: 1 },
  { id: "c", x: 0, y: 0.5 },
];

describe("viewport transforms", () => {
  it("fit keeps every point inside the padded screen", () => {
    const v = fitViewport(POINTS, SCREEN);
    for (const p of POINTS) {
      const [sx, sy] = worldToScreen(v, SCREEN, p.x, p.y);
      expect(sx).toBeGreaterThanOrEqual(0);
      expect(sx).toBeLessThanOrEqual(SCREEN.width);
      expect(sy).toBeGreaterThanOrEqual(0);
      expect(sy).toBeLessThanOrEqual(SCREEN.height);
    }
  });

  it("screenToWorld inverts worldToScreen", () => {
    const v = { centerX: 1.5, centerY: -0.25, scale: 120 };
    const [sx, sy] = worldToScreen(v, SCREEN, 2.25, 0.75);
    const [wx, wy] = screenToWorld(v, SCREEN, sx, sy);
    expect(wx).toBeCloseTo(2.25, 12);
    expect(wy).toBeCloseTo(0.75, 12);
  });

  it("pan moves the world under the cursor by the pixel delta", () => {
    const v = { centerX: 0, centerY: 0, scale: 100 };
    const moved = pan(v, 50, -30);
    const [sx, sy] = worldToScreen(moved, SCREEN, 0, 0);
    expect(sx).toBeCloseTo(SCREEN.width / 2 + 50, 9);
    expect(sy).toBeCloseTo(SCREEN.height / 2 - 30, 9);
  });

  it("zoomAt keeps the anchor point fixed on screen", () => {
    const v = { centerX: 0.4, centerY: -0.8, scale: 90 };
    const anchor: [number, number] = [230, 470];
    const [wx, wy] = screenToWorld(v, SCREEN, ...anchor);
    const zoomed = zoomAt(v, SCREEN, anchor[0], anchor[1], 1.5);
    const [sx, sy] = worldToScreen(zoomed, SCREEN, wx, wy);
    expect(sx).toBeCloseTo(anchor[0], 9);
    expect(sy).toBeCloseTo(anchor[1], 9);
    expect(zoomed.scale).toBeCloseTo(135, 9);
  });

  it("degenerate point sets still produce a usable viewport", () => {
    const v = fitViewport([{ id: "only", x: 3, y: 3 }], SCREEN);
    expect(Number.isFinite(v.scale)).toBe(true);
    expect(v.scale).toBeGreaterThan(0);
  });
});
