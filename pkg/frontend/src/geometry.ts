/** Polygon validity rules mirrored from the service, plus stroke
 * vectorization. The client rejects bad polygons before they reach the wire;
 * the service re-validates, so this is a convenience mirror, not authority.
 */

import type { Point } from "./types.js";

function orient(a: Point, b: Point, c: Point): number {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

function onSegment(a: Point, b: Point, p: Point): boolean {
  return (
    Math.min(a.x, b.x) <= p.x &&
    p.x <= Math.max(a.x, b.x) &&
    Math.min(a.y, b.y) <= p.y &&
    p.y <= Math.max(a.y, b.y)
  );
}

export function segmentsIntersect(a: Point, b: Point, c: Point, d: Point): boolean {
  const o1 = orient(a, b, c);
  const o2 = orient(a, b, d);
  const o3 = orient(c, d, a);
  const o4 = orient(c, d, b);
  if (o1 > 0 !== o2 > 0 && o3 > 0 !== o4 > 0 && o1 !== 0 && o2 !== 0 && o3 !== 0 && o4 !== 0) {
    return true;
  }
  if (o1 === 0 && onSegment(a, b, c)) return true;
  if (o2 === 0 && onSegment(a, b, d)) return true;
  if (o3 === 0 && onSegment(c, d, a)) return true;
  if (o4 === 0 && onSegment(c, d, b)) return true;
  return false;
}

/** Null when simple; otherwise a human-readable reason. */
export function simplicityViolation(vertices: Point[]): string | null {
  const k = vertices.length;
  if (k < 3) return "polygon needs at least 3 vertices";
  for (let i = 0; i < k; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % k];
    if (a.x === b.x && a.y === b.y) return `zero-length edge at vertex ${i}`;
  }
  for (let i = 0; i < k; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % k];
    const c = vertices[(i + 2) % k];
    const ux = b.x - a.x;
    const uy = b.y - a.y;
    const wx = c.x - b.x;
    const wy = c.y - b.y;
    if (ux * wy - uy * wx === 0 && ux * wx + uy * wy < 0) {
      return `fold-back at vertex ${(i + 1) % k}`;
    }
  }
  for (let i = 0; i < k; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % k];
    for (let j = i + 2; j < k; j++) {
      if (i === 0 && j === k - 1) continue; // adjacent through the closing vertex
      const c = vertices[j];
      const d = vertices[(j + 1) % k];
      if (segmentsIntersect(a, b, c, d)) return `edges ${i} and ${j} intersect`;
    }
  }
  return null;
}

export interface VectorizeOptions {
  /** Drop consecutive samples closer than this distance. */
  minSpacing: number;
  /** Drop a middle vertex when the triangle it spans is flatter than this. */
  collinearArea: number;
}

/**
 * Turn a raw lasso stroke (mouse samples surrounding the area of interest)
 * into a closed polygon: resample to a minimum spacing, drop collinear
 * runs, and validate simplicity. Returns the polygon or throws.
 */
export function vectorizeStroke(
  stroke: Point[],
  opts: VectorizeOptions = { minSpacing: 0, collinearArea: 0 },
): Point[] {
  const spaced: Point[] = [];
  for (const p of stroke) {
    const prev = spaced[spaced.length - 1];
    if (
      prev === undefined ||
      Math.hypot(p.x - prev.x, p.y - prev.y) >= opts.minSpacing
    ) {
      spaced.push({ x: p.x, y: p.y });
    }
  }
  // Closing duplicate (stroke back at its start) collapses into the implicit edge.
  while (spaced.length > 1) {
    const first = spaced[0];
    const last = spaced[spaced.length - 1];
    if (
      Math.hypot(last.x - first.x, last.y - first.y) < opts.minSpacing ||
      (last.x === first.x && last.y === first.y)
    ) {
      spaced.pop();
    } else {
      break;
    }
  }
  const out: Point[] = [];
  for (const p of spaced) {
    const n = out.length;
    if (n >= 2) {
      const a = out[n - 2];
      const b = out[n - 1];
      if (Math.abs(orient(a, b, p)) <= opts.collinearArea) {
        out.pop(); // b lies on the segment a-p (within tolerance)
      }
    }
    out.push(p);
  }
  const err = simplicityViolation(out);
  if (err !== null) {
    throw new Error(`stroke does not close into a simple polygon: ${err}`);
  }
  return out;
}

/** Boundary-inclusive even-odd containment (mirrors the service rule). */
export function pointInPolygon(p: Point, vertices: Point[]): boolean {
  const k = vertices.length;
  let inside = false;
  for (let i = 0; i < k; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % k];
    const cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (
      cross === 0 &&
      Math.min(a.x, b.x) <= p.x &&
      p.x <= Math.max(a.x, b.x) &&
      Math.min(a.y, b.y) <= p.y &&
      p.y <= Math.max(a.y, b.y)
    ) {
      return true;
    }
    if (a.y > p.y !== b.y > p.y) {
      const xi = a.x + ((p.y - a.y) * (b.x - a.x)) / (b.y - a.y);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}
