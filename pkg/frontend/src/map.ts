import type { GridInfo, StateSnapshot } from "./types";

/**
 * Map geometry and scene construction.
 *
 * The map is abstract planar (metres), not geo-tiles.  Scene building is
 * pure data so it can be tested without a canvas: shapes are polygons,
 * polylines and markers in world coordinates; the renderer applies one
 * world-to-canvas transform.
 */

export interface Shape {
  kind: "cell" | "region" | "trail" | "vehicle" | "target";
  points: Array<[number, number]>;
  color: string;
  label?: string;
}

export function axes(grid: GridInfo): { u: [number, number]; v: [number, number] } {
  const a = (grid.angle * Math.PI) / 180;
  return {
    u: [Math.cos(a), Math.sin(a)],
    v: [-Math.sin(a), Math.cos(a)],
  };
}

export function cellCenter(grid: GridInfo, cell: number): [number, number] {
  const r = Math.floor(cell / grid.cols);
  const c = cell % grid.cols;
  const { u, v } = axes(grid);
  const du = (c + 0.5) * grid.cell_size;
  const dv = (r + 0.5) * grid.cell_size;
  return [
    grid.origin[0] + du * u[0] + dv * v[0],
    grid.origin[1] + du * u[1] + dv * v[1],
  ];
}

export function cellPolygon(grid: GridInfo, cell: number): Array<[number, number]> {
  const r = Math.floor(cell / grid.cols);
  const c = cell % grid.cols;
  const { u, v } = axes(grid);
  const corners: Array<[number, number]> = [];
  for (const [dc, dr] of [[0, 0], [1, 0], [1, 1], [0, 1]] as Array<[number, number]>) {
    const du = (c + dc) * grid.cell_size;
    const dv = (r + dr) * grid.cell_size;
    corners.push([
      grid.origin[0] + du * u[0] + dv * v[0],
      grid.origin[1] + du * u[1] + dv * v[1],
    ]);
  }
  return corners;
}

export function regionColor(name: string): string {
  // no-fly zones red, mission areas green
  return /nof/i.test(name) ? "rgba(214,69,65,0.45)" : "rgba(38,166,91,0.35)";
}

export function buildScene(snapshot: StateSnapshot, trail: number[]): Shape[] {
  const grid = snapshot.grid;
  const shapes: Shape[] = [];
  for (const cell of grid.cells) {
    shapes.push({ kind: "cell", points: cellPolygon(grid, cell), color: "#e8edf2" });
  }
  for (const [name, cells] of Object.entries(grid.regions).sort()) {
    for (const cell of cells) {
      shapes.push({
        kind: "region",
        points: cellPolygon(grid, cell),
        color: regionColor(name),
        label: name,
      });
    }
  }
  if (trail.length > 1) {
    shapes.push({
      kind: "trail",
      points: trail.map((c) => cellCenter(grid, c)),
      color: "#2a6fb0",
    });
  }
  const t = snapshot.telemetry;
  if (t.target !== null) {
    shapes.push({ kind: "target", points: [cellCenter(grid, t.target)], color: "#e0a030" });
  }
  shapes.push({ kind: "vehicle", points: [[t.x, t.y]], color: t.flying ? "#18334d" : "#7b8794" });
  return shapes;
}

export function worldTransform(
  grid: GridInfo,
  width: number,
  height: number,
  margin = 12,
): (p: [number, number]) => [number, number] {
  const corners: Array<[number, number]> = [];
  for (const cell of grid.cells) {
    corners.push(...cellPolygon(grid, cell));
  }
  const xs = corners.map((p) => p[0]);
  const ys = corners.map((p) => p[1]);
  const minX = Math.min(...xs);
  const maxX = Math.max(...xs);
  const minY = Math.min(...ys);
  const maxY = Math.max(...ys);
  const scale = Math.min(
    (width - 2 * margin) / Math.max(maxX - minX, 1e-9),
    (height - 2 * margin) / Math.max(maxY - minY, 1e-9),
  );
  return ([x, y]) => [
    margin + (x - minX) * scale,
    height - margin - (y - minY) * scale,
  ];
}

export function renderScene(
  ctx: CanvasRenderingContext2D,
  shapes: Shape[],
  tx: (p: [number, number]) => [number, number],
): void {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  for (const s of shapes) {
    if (s.kind === "cell" || s.kind === "region") {
      ctx.beginPath();
      s.points.forEach((p, i) => {
        const [x, y] = tx(p);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.closePath();
      if (s.kind === "cell") {
        ctx.strokeStyle = "#c3ccd4";
        ctx.stroke();
      } else {
        ctx.fillStyle = s.color;
        ctx.fill();
      }
    } else if (s.kind === "trail") {
      ctx.beginPath();
      s.points.forEach((p, i) => {
        const [x, y] = tx(p);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.strokeStyle = s.color;
      ctx.lineWidth = 2;
      ctx.stroke();
      ctx.lineWidth = 1;
    } else {
      const [x, y] = tx(s.points[0]);
      ctx.beginPath();
      ctx.arc(x, y, s.kind === "vehicle" ? 6 : 4, 0, 2 * Math.PI);
      ctx.fillStyle = s.color;
      ctx.fill();
    }
  }
}
