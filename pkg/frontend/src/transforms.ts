// Local polygon edit math. Mirrors the engine's transform semantics
// (translate / scale about centroid / rotate about centroid / vertex drag)
// so that what the user sees is what the search request carries.

import { Point } from "./schemas.js";

export function centroid(ring: Point[]): Point {
  let area2 = 0;
  let cx = 0;
  let cy = 0;
  const n = ring.length;
  for (let i = 0; i < n; i++) {
    const [x0, y0] = ring[i];
    const [x1, y1] = ring[(i + 1) % n];
    const cross = x0 * y1 - x1 * y0;
    area2 += cross;
    cx += (x0 + x1) * cross;
    cy += (y0 + y1) * cross;
  }
  if (Math.abs(area2) < 1e-12) {
    // degenerate ring: fall back to the vertex mean
    const sx = ring.reduce((s, p) => s + p[0], 0);
    const sy = ring.reduce((s, p) => s + p[1], 0);
    return [sx / n, sy / n];
  }
  return [cx / (3 * area2), cy / (3 * area2)];
}

export function translateRing(ring: Point[], dx: number, dy: number): Point[] {
  return ring.map(([x, y]) => [x + dx, y + dy]);
}

export function scaleRing(ring: Point[], fx: number, fy = fx): Point[] {
  const [cx, cy] = centroid(ring);
  return ring.map(([x, y]) => [cx + (x - cx) * fx, cy + (y - cy) * fy]);
}

export function rotateRing(ring: Point[], degrees: number): Point[] {
  const [cx, cy] = centroid(ring);
  const theta = (degrees * Math.PI) / 180;
  const cos = Math.cos(theta);
  const sin = Math.sin(theta);
  return ring.map(([x, y]) => {
    const dx = x - cx;
    const dy = y - cy;
    return [cx + dx * cos - dy * sin, cy + dx * sin + dy * cos];
  });
}

export function moveVertex(ring: Point[], index: number, x: number, y: number): Point[] {
  const out = ring.map((p) => [...p] as Point);
  out[index] = [x, y];
  return out;
}

export function distinctVertexCount(ring: Point[]): number {
  return new Set(ring.map(([x, y]) => `${x},${y}`)).size;
}

export function boundingBox(ring: Point[]): { x0: number; y0: number; x1: number; y1: number } {
  const xs = ring.map((p) => p[0]);
  const ys = ring.map((p) => p[1]);
  return {
    x0: Math.min(...xs),
    y0: Math.min(...ys),
    x1: Math.max(...xs),
    y1: Math.max(...ys),
  };
}
