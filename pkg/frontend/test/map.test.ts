import { describe, expect, it } from "vitest";

import { buildScene, cellCenter, cellPolygon, regionColor, worldTransform } from "../src/map";
import type { GridInfo, StateSnapshot } from "../src/types";

function grid(angle = 0): GridInfo {
  return {
    rows: 2, cols: 3, cell_size: 10, origin: [0, 0], angle,
    cells: [0, 1, 2, 3, 4, 5],
    regions: { NoFlyOld: [3, 4, 5], A1: [0] },
  };
}

function snap(): StateSnapshot {
  return {
    mode: "running", tick: 1, controller_state: 0, controller_states: 3,
    update: { state: "idle" }, bound: [],
    telemetry: { t: 0, x: 15, y: 5, alt: 1, battery: 100, flying: true, cell: 1, target: 2, bound: [], held: [] },
    grid: grid(), log_length: 0,
  };
}

describe("map geometry", () => {
  it("cell centres land in the middle of the cell", () => {
    expect(cellCenter(grid(), 0)).toEqual([5, 5]);
    expect(cellCenter(grid(), 4)).toEqual([15, 15]);
  });

  it("rotation keeps centres inside rotated polygons", () => {
    const g = grid(30);
    const [cx, cy] = cellCenter(g, 4);
    const poly = cellPolygon(g, 4);
    const xs = poly.map((p) => p[0]);
    const ys = poly.map((p) => p[1]);
    expect(cx).toBeGreaterThan(Math.min(...xs));
    expect(cx).toBeLessThan(Math.max(...xs));
    expect(cy).toBeGreaterThan(Math.min(...ys));
    expect(cy).toBeLessThan(Math.max(...ys));
  });

  it("no-fly regions shade red, mission areas green", () => {
    expect(regionColor("NoFlyOld")).toContain("214,69,65");
    expect(regionColor("NoF3")).toContain("214,69,65");
    expect(regionColor("A1")).toContain("38,166,91");
  });

  it("scene places the vehicle marker inside its cell", () => {
    const s = snap();
    const shapes = buildScene(s, [0, 1]);
    const vehicle = shapes.find((sh) => sh.kind === "vehicle")!;
    const [vx, vy] = vehicle.points[0];
    const poly = cellPolygon(s.grid, s.telemetry.cell!);
    const xs = poly.map((p) => p[0]);
    const ys = poly.map((p) => p[1]);
    expect(vx).toBeGreaterThanOrEqual(Math.min(...xs));
    expect(vx).toBeLessThanOrEqual(Math.max(...xs));
    expect(vy).toBeGreaterThanOrEqual(Math.min(...ys));
    expect(vy).toBeLessThanOrEqual(Math.max(...ys));
    const regions = shapes.filter((sh) => sh.kind === "region" && sh.label === "NoFlyOld");
    expect(regions.length).toBe(3);
    const trail = shapes.find((sh) => sh.kind === "trail")!;
    expect(trail.points).toEqual([cellCenter(s.grid, 0), cellCenter(s.grid, 1)]);
  });

  it("world transform maps the workspace into the canvas", () => {
    const tx = worldTransform(grid(), 300, 200);
    for (const cell of grid().cells) {
      const [x, y] = tx(cellCenter(grid(), cell));
      expect(x).toBeGreaterThan(0);
      expect(x).toBeLessThan(300);
      expect(y).toBeGreaterThan(0);
      expect(y).toBeLessThan(200);
    }
  });
});
